"""Self-check suites behind ``bislab verify``.

Each suite pits a code path against an independent route to the same number.
``fault=True`` flips the sign of the unscaled sum-rate bound before comparing
it with the scaled one; it exists so the negative control can be exercised
from the command line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from bislab import codec, ratefuncs, region
from bislab.gaussmodel import AuxiliaryParams, UnscaledParams, sample_converted, sample_forward, to_scaled
from bislab.ratefuncs import EXAMPLES


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def scaled_unscaled(count: int = 100, seed: int = 0, fault: bool = False) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        up = UnscaledParams(*rng.uniform(0.05, 10.0, size=3))
        a = AuxiliaryParams(float(rng.uniform(1e-3, 1.0)))
        r_i = float(rng.uniform(0.0, 0.5))
        p = to_scaled(up)
        for model in region.Model:
            got = region.unscaled_region_bounds(up, a, r_i, model)
            if fault:
                got = (-got[0],) + got[1:]
            want = (region.sum_rate_bound(p, a), region.storage_bound(model, p, a, r_i),
                    region.leakage_bound(p, a, r_i))
            worst = max(worst, *(abs(g - w) for g, w in zip(got, want)))
    return SuiteResult("scaled_unscaled", worst <= 1e-10, f"max |diff| = {worst:.3g} nats")


def alpha_roundtrip(grid: int = 100) -> SuiteResult:
    worst = 0.0
    for ex in EXAMPLES:
        for p in ex.cases:
            for al in np.linspace(1e-3, 1.0, grid):
                a = AuxiliaryParams(float(al))
                rj = ratefuncs.rj_of_alpha(p, a)
                worst = max(worst,
                            abs(ratefuncs.alpha_of_rj(p, rj) - al),
                            abs(ratefuncs.max_secrecy(p, rj) - region.sum_rate_bound(p, a)),
                            abs(ratefuncs.min_leakage(p, rj) - region.leakage_bound(p, a, 0.0)))
    return SuiteResult("alpha_roundtrip", worst <= 1e-10, f"max |diff| = {worst:.3g}")


def slope_fd(h: float = 1e-6) -> SuiteResult:
    worst = 0.0
    for ex in EXAMPLES:
        for p in ex.cases:
            fd_s = (ratefuncs.max_secrecy(p, h) - ratefuncs.max_secrecy(p, 0.0)) / h
            fd_l = (ratefuncs.min_leakage(p, h) - ratefuncs.min_leakage(p, 0.0)) / h
            worst = max(worst, abs(fd_s - ratefuncs.secrecy_slope(p)), abs(fd_l - ratefuncs.leakage_slope(p)))
    return SuiteResult("slope_fd", worst <= 1e-3, f"max |fd - closed form| = {worst:.3g}")


def covariance(count: int = 100_000, seed: int = 0) -> SuiteResult:
    """Population check for the forward sampler, then forward against converted
    on common random numbers (same seed)."""
    tol = 4.0 / math.sqrt(count)
    worst = 0.0
    for ex in EXAMPLES:
        for p in ex.cases:
            fwd = np.cov(sample_forward(p, 1, count, seed).stacked(), rowvar=False)
            conv = np.cov(sample_converted(p, 1, count, seed).stacked(), rowvar=False)
            worst = max(worst, np.abs(fwd - p.covariance()).max(), np.abs(conv - fwd).max())
    return SuiteResult("covariance", worst <= tol, f"max entry deviation {worst:.3g} (tol {tol:.3g})")


def one_time_pad(max_m: int = 64, draws: int = 100_000, seed: int = 0) -> SuiteResult:
    for m in range(1, max_m + 1):
        for s_c in range(1, m + 1):
            for s_g in range(1, m + 1):
                if codec.unmask(codec.mask(s_c, s_g, m), s_g, m) != s_c:
                    return SuiteResult("one_time_pad", False, f"round trip broken at m={m}")
    m = 8
    rng = np.random.default_rng(seed)
    keys = rng.integers(1, m + 1, size=draws)
    masked = np.array([codec.mask(5, int(k), m) for k in keys])
    observed = np.bincount(masked, minlength=m + 1)[1:]
    pval = float(stats.chisquare(observed).pvalue)
    return SuiteResult("one_time_pad", pval > 0.01, f"round trip exhaustive to M_S={max_m}; chi2 p={pval:.3g}")


def run_all(quick: bool = False, fault: bool = False) -> list[SuiteResult]:
    if quick:
        return [scaled_unscaled(20, fault=fault), alpha_roundtrip(20), slope_fd(),
                covariance(20_000), one_time_pad(16, 10_000)]
    return [scaled_unscaled(fault=fault), alpha_roundtrip(), slope_fd(), covariance(), one_time_pad()]
