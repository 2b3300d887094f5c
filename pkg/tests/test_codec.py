import math
from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from bislab.codec import (
    TRIAL_FIELDS,
    CodecConfig,
    ConfigInfeasible,
    GaussianPairLaw,
    HelperRecord,
    Mode,
    build_codebook,
    calibrate_eps,
    enroll,
    enrollment_scores,
    identify,
    is_jointly_typical,
    mask,
    plan,
    run_experiment,
    unmask,
    worker_count,
    yu_law,
    zu_law,
)
from bislab.gaussmodel import AuxiliaryParams, ChannelParams, make_rng, mi_yu, mi_zu, sample_forward

P = ChannelParams(F(9, 10), F(7, 8))
BASE_CFG = CodecConfig(n=16, alpha=0.5, delta=0.05, r_i=0.1, eps=0.35)


def hand_sizes(n, alpha=F(1, 2), delta=0.05, r_i=0.1):
    """Rate settings worked out from the rational channel parameters."""
    c = F(9, 10) * F(7, 8)
    izu = 0.5 * math.log2(1 / float(alpha * c + 1 - c))
    iyu = 0.5 * math.log2(1 / float(alpha))
    r_s = izu - r_i - 2 * delta
    r_j = iyu - izu + r_i + 6 * delta
    return 2 ** (n * r_i), 2 ** (n * r_s), 2 ** (n * r_j)


def test_sizes_at_reference_point():
    mi, ms, mj = hand_sizes(16)
    assert (round(mi, 3), round(ms, 2), round(mj, 1)) == (3.031, 5.96, 394.5)
    sizes = plan(P, BASE_CFG)
    assert (sizes.m_i, sizes.m_s, sizes.m_j) == (4, 6, 395)
    assert sizes.elements == 16 * 6 * 395 <= 2 ** 26


def test_cardinality_guard_against_float_overshoot():
    # 2 ** (20 * 0.1) is exactly 4 in exact arithmetic
    assert plan(P, replace(BASE_CFG, n=20)).m_i == 4


@pytest.mark.parametrize("n", [8, 12, 16, 20])
def test_rate_accounting(n):
    c = replace(BASE_CFG, n=n)
    sizes = plan(P, c)
    a = AuxiliaryParams(0.5)
    lg = lambda m: math.log2(m) / n
    assert lg(sizes.m_s) + lg(sizes.m_j) >= mi_yu(a, "bits") + 4 * c.delta - 2 / n
    assert lg(sizes.m_i) + lg(sizes.m_s) <= mi_zu(P, a, "bits") - 2 * c.delta + 2 / n


def test_infeasible_configs():
    with pytest.raises(ConfigInfeasible):
        plan(P, replace(BASE_CFG, alpha=1.0))
    with pytest.raises(ConfigInfeasible):
        plan(P, replace(BASE_CFG, r_i=0.5))
    with pytest.raises(ConfigInfeasible) as info:
        plan(P, replace(BASE_CFG, n=16, cap=1000))
    assert info.value.required == 16 * 6 * 395
    with pytest.raises(ValueError):
        CodecConfig(n=0, alpha=0.5, delta=0.05, r_i=0.1, eps=0.3)
    with pytest.raises(ValueError):
        CodecConfig(n=4, alpha=0.5, delta=0.05, r_i=0.1, eps=0.0)


def test_codebook_is_deterministic_and_immutable():
    a = build_codebook(P, BASE_CFG, seed=3)
    b = build_codebook(P, BASE_CFG, seed=3)
    np.testing.assert_array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, build_codebook(P, BASE_CFG, seed=4).entries)
    assert (a.m_s, a.m_j, a.n) == (6, 395, 16)
    with pytest.raises(ValueError):
        a.entries[0, 0, 0] = 1.0
    np.testing.assert_array_equal(a.entry(2, 3), a.entries[1, 2])


def test_codebook_variance():
    cb = build_codebook(P, BASE_CFG, seed=0)
    count = cb.entries.size
    assert cb.entries.var() == pytest.approx(cb.gen_variance, abs=4 / math.sqrt(count))


def _weak_typicality_oracle(a, b, law: GaussianPairLaw):
    """Direct evaluation of -(1/n) log density against the entropies."""
    h_a, h_b, h_ab = law.entropies()
    cov = np.array([[law.var_a, law.cov], [law.cov, law.var_b]])
    ll_a = stats.norm(scale=math.sqrt(law.var_a)).logpdf(a).mean()
    ll_b = stats.norm(scale=math.sqrt(law.var_b)).logpdf(b).mean()
    ll_ab = stats.multivariate_normal(cov=cov).logpdf(np.column_stack([a, b])).mean()
    return max(abs(-ll_a - h_a), abs(-ll_b - h_b), abs(-ll_ab - h_ab))


def test_typicality_matches_density_oracle():
    rng = np.random.default_rng(0)
    law = zu_law(P, 0.5)
    from bislab.codec import typicality_score
    for _ in range(50):
        a = rng.standard_normal(20)
        b = rng.standard_normal(20) * 0.6
        assert float(typicality_score(a, b, law)) == pytest.approx(_weak_typicality_oracle(a, b, law), abs=1e-9)


def test_typicality_examples():
    rng = np.random.default_rng(1)
    law = yu_law(0.2)  # correlation sqrt(0.8)
    cov = np.array([[law.var_a, law.cov], [law.cov, law.var_b]])
    hits = 0
    for _ in range(100):
        pair = rng.multivariate_normal([0, 0], cov, size=10_000).T
        hits += is_jointly_typical(pair, law, 0.1)
    assert hits >= 99
    misses = 0
    for _ in range(100):
        a = rng.standard_normal(10_000)
        b = rng.standard_normal(10_000) * math.sqrt(law.var_b)
        misses += not is_jointly_typical((a, b), law, 0.05)
    assert misses >= 99
    assert is_jointly_typical((np.zeros(8), np.zeros(8)), GaussianPairLaw(1.0, 1.0, 0.5), 10.0)
    with pytest.raises(ValueError):
        is_jointly_typical((np.zeros(3), np.zeros(4)), law, 1.0)


def test_enroll_slack_extremes():
    cb = build_codebook(P, BASE_CFG, seed=1)
    rng = np.random.default_rng(2)
    for t in range(20):
        y = sample_forward(P, 16, 1, seed=t).y[0]
        pair = enroll(y, cb, 10.0, rng)
        assert pair is not None and 1 <= pair[0] <= cb.m_s and 1 <= pair[1] <= cb.m_j
    fails = sum(enroll(sample_forward(P, 16, 1, seed=t).y[0], cb, 1e-6, rng) is None for t in range(50))
    assert fails >= 49


def test_enroll_failure_rate_at_operating_point():
    scores = enrollment_scores(P, BASE_CFG, 500, seed=12345)
    assert np.mean(scores > 0.35) < 0.2
    assert calibrate_eps(P, BASE_CFG, trials=500) <= 0.35


def test_identify_single_candidate():
    c = replace(BASE_CFG, n=8, m_s=1, users=1)
    cb = build_codebook(P, c, seed=0)
    z = sample_forward(P, 8, 1, seed=5).z[0]
    got = identify(z, [HelperRecord(7)], cb, 10.0, P)
    assert (got.status, got.user, got.key) == ("ok", 1, 1)
    with pytest.raises(ValueError):
        identify(z, [], cb, 10.0, P)
    with pytest.raises(ValueError):
        identify(z, [HelperRecord(cb.m_j + 1)], cb, 10.0, P)


def test_identify_reports_ambiguity():
    c = replace(BASE_CFG, n=8, m_s=3, users=2)
    cb = build_codebook(P, c, seed=0)
    z = sample_forward(P, 8, 1, seed=5).z[0]
    got = identify(z, [HelperRecord(1), HelperRecord(2)], cb, 10.0, P)
    assert got.status == "ambiguous" and got.matches.shape == (2, 3) and got.matches.all()


def _impostor_trials(n=16, trials=200):
    """Impostor rejection, impostor unique acceptance and genuine success rates."""
    c = replace(BASE_CFG, n=n)
    eps = calibrate_eps(P, c, trials=300)
    cb = build_codebook(P, c, seed=9)
    rng = make_rng(9, 1)
    rejected = accepted = genuine_ok = 0
    for t in range(trials):
        db, blocks, keys = [], [], []
        for k in range(4):
            blocks.append(sample_forward(P, n, 1, make_rng(9, t, k)))
            pair = enroll(blocks[-1].y[0], cb, eps, rng)
            keys.append(pair)
            db.append(HelperRecord(pair[1] if pair else 1))
        imp = identify(sample_forward(P, n, 1, make_rng(10, t)).z[0], db, cb, eps, P)
        rejected += imp.status == "none"
        accepted += imp.status == "ok"
        own = identify(blocks[0].z[0], db, cb, eps, P)
        genuine_ok += keys[0] is not None and (own.user, own.key) == (1, keys[0][0])
    return rejected / trials, accepted / trials, genuine_ok / trials


# At n <= 20 the (Z, U) typical set is wide enough that a random probe still
# lands near some stored codeword in roughly 70% of trials.
@pytest.mark.xfail(strict=True, reason="impostor rejection is about 0.3 at desk-scale block length")
def test_impostor_is_rejected():
    rejected, _, _ = _impostor_trials()
    assert rejected >= 0.9


def test_over_rate_drives_errors_up():
    c = replace(BASE_CFG, m_s=64, eps=0.23)
    stats_ = run_experiment(P, c, users=4, trials=300, seed=0)
    a = AuxiliaryParams(0.5)
    assert math.log2(4) / 16 + math.log2(64) / 16 > mi_zu(P, a, "bits")
    assert stats_.error_probability > 0.9


def test_mask_examples_and_round_trip():
    assert mask(5, 7, 8) == 3 and unmask(3, 7, 8) == 5
    assert all(mask(s, 1, 8) == s for s in range(1, 9))
    for m in range(1, 65):
        for s_c in range(1, m + 1):
            for s_g in range(1, m + 1):
                assert unmask(mask(s_c, s_g, m), s_g, m) == s_c
    with pytest.raises(ValueError):
        mask(0, 1, 8)
    with pytest.raises(ValueError):
        unmask(9, 1, 8)


def test_mask_output_uniform():
    rng = np.random.default_rng(7)
    keys = rng.integers(1, 9, size=100_000)
    out = np.bincount([mask(5, int(k), 8) for k in keys], minlength=9)[1:]
    assert stats.chisquare(out).pvalue > 0.01


def test_forced_perfect_chosen_mode():
    c = replace(BASE_CFG, n=8, eps=10.0, m_s=1, users=1)
    res = run_experiment(P, c, Mode.CHOSEN, trials=50, seed=1)
    assert res.error_probability == 0.0
    assert res.masked_key_mi is not None


def test_chosen_and_generated_coupling():
    c = replace(BASE_CFG, n=12, eps=0.25)
    gen = run_experiment(P, c, Mode.GENERATED, users=4, trials=150, seed=3)
    cho = run_experiment(P, c, Mode.CHOSEN, users=4, trials=150, seed=3)
    assert [r.error for r in gen.records] == [r.error for r in cho.records]
    assert 0 < gen.error_probability < 1
    m_s = cho.sizes.m_s
    for g, ch in zip(gen.records, cho.records):
        # the generated-mode secret is the pad key, including the E1 fallback
        assert ch.helper == HelperRecord(g.helper.generated, mask(ch.secret, g.secret, m_s))


def test_event_flags_consistent():
    c = replace(BASE_CFG, n=12, eps=0.25)
    res = run_experiment(P, c, users=4, trials=150, seed=4)
    for r in res.records:
        if r.e1:
            assert r.enrolled is None and r.error and not r.e2 and not r.e3
        if not (r.e1 or r.e2 or r.e3 or r.e4):
            assert not r.error and r.decoded == (r.user, r.secret)
        assert set(r.flat()) == set(TRIAL_FIELDS)


def test_results_independent_of_worker_count():
    c = replace(BASE_CFG, n=8, eps=0.32)
    one = run_experiment(P, c, users=4, trials=60, seed=5, workers=1)
    three = run_experiment(P, c, users=4, trials=60, seed=5, workers=3)
    assert [r.flat() for r in one.records] == [r.flat() for r in three.records]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("BIS_LAB_THREADS", "2")
    assert worker_count() == 2
    monkeypatch.delenv("BIS_LAB_THREADS")
    assert worker_count() >= 1


def test_user_permutation_exchangeability():
    c = replace(BASE_CFG, n=12, eps=0.25)
    base = run_experiment(P, c, users=4, trials=120, seed=6, fresh_codebook=False)
    perm = run_experiment(P, c, users=4, trials=120, seed=6, fresh_codebook=False, user_permutation=[2, 0, 3, 1])
    assert base.per_user_errors == perm.per_user_errors
    assert base.error_probability == perm.error_probability
    with pytest.raises(ValueError):
        run_experiment(P, c, users=4, trials=2, seed=6, user_permutation=[0, 0, 1, 2])


def test_masked_key_leaks_little():
    c = replace(BASE_CFG, n=8, eps=0.32)
    res = run_experiment(P, c, Mode.CHOSEN, users=1, trials=10_000, seed=8)
    assert res.masked_key_mi.value < 0.05
    assert res.key_entropy <= res.key_entropy_max + 1e-12
