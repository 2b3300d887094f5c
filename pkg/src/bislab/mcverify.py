"""Estimators used as independent checks of the closed forms.

``gaussian_mi_from_samples`` is the covariance (plug-in) estimator
``-0.5 log(1 - r^2)``. It is a mutual-information estimator only for jointly
Gaussian pairs, which is the only kind this package ever feeds it.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np
from scipy import stats

from bislab.units import from_nats


class DegenerateSampleError(ValueError):
    """A marginal has (numerically) zero sample variance."""


@dataclass(frozen=True)
class EstimateWithCI:
    value: float
    std_error: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"count must be >= 2, got {self.count}")
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.std_error


def gaussian_mi_from_samples(pairs, base: str = "nats") -> EstimateWithCI:
    """Gaussian plug-in mutual information of the two columns of ``pairs``.

    The standard error uses the delta method with ``var(r) ~ (1 - r^2)^2 / N``,
    which gives ``se = |r| / sqrt(N)``. Perfectly correlated columns return an
    infinite estimate.
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (N, 2) array, got shape {arr.shape}")
    count = arr.shape[0]
    if count < 100:
        raise ValueError(f"need at least 100 pairs, got {count}")
    a, b = arr[:, 0], arr[:, 1]
    va, vb = a.var(), b.var()
    if va < 1e-12 or vb < 1e-12:
        raise DegenerateSampleError(f"marginal sample variance too small ({va:.3g}, {vb:.3g})")
    r = float(np.mean((a - a.mean()) * (b - b.mean())) / math.sqrt(va * vb))
    r = max(-1.0, min(1.0, r))
    if abs(r) >= 1.0 - 1e-15:
        return EstimateWithCI(math.inf, math.inf, count)
    value = -0.5 * math.log1p(-r * r)
    se = abs(r) / math.sqrt(count)
    return EstimateWithCI(from_nats(value, base), from_nats(se, base), count)


def _codes(labels: Iterable[Hashable]) -> np.ndarray:
    index: dict = {}
    return np.array([index.setdefault(lab, len(index)) for lab in labels], dtype=np.int64)


def plugin_entropy(labels, base: str = "nats") -> float:
    counts = np.array(list(Counter(labels).values()), dtype=float)
    if counts.size == 0:
        raise ValueError("no labels")
    prob = counts / counts.sum()
    return from_nats(float(-(prob * np.log(prob)).sum()), base)


def discrete_plugin_mi(pairs, base: str = "nats") -> EstimateWithCI:
    """Plug-in mutual information of two label streams.

    ``pairs`` is a sequence of ``(a, b)`` with hashable labels. The standard error
    is the usual asymptotic one, ``sqrt(var(log p(a,b)/(p(a)p(b))) / N)``; the
    estimate itself carries an upward bias of roughly
    ``(|A|-1)(|B|-1) / (2N)`` nats, so callers should look at ``count``.
    """
    pairs = list(pairs)
    count = len(pairs)
    if count < 2:
        raise ValueError("need at least 2 pairs")
    a = _codes(p[0] for p in pairs)
    b = _codes(p[1] for p in pairs)
    na, nb = int(a.max()) + 1, int(b.max()) + 1
    if count < 30 * na * nb:
        warnings.warn(f"plug-in MI with {count} samples over a {na}x{nb} alphabet is biased", stacklevel=2)
    joint = np.zeros((na, nb))
    np.add.at(joint, (a, b), 1.0)
    joint /= count
    pa, pb = joint.sum(axis=1), joint.sum(axis=0)
    nz = joint > 0
    pmi = np.log(joint[nz] / np.outer(pa, pb)[nz])
    value = float((joint[nz] * pmi).sum())
    second = float((joint[nz] * pmi ** 2).sum())
    se = math.sqrt(max(second - value * value, 0.0) / count)
    return EstimateWithCI(from_nats(max(value, 0.0), base), from_nats(se, base), count)


class Direction(str, enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


_EXACT_MAX = 8


def trend_test(xs, direction: Direction = Direction.DECREASING) -> float:
    """One-sided Spearman rank test of a monotone trend against position.

    For up to eight points the p-value is exact: the observed rank correlation is
    compared with its value under every permutation of ``xs`` (ties included).
    Longer sequences use scipy's t approximation.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size < 4:
        raise ValueError(f"need at least 4 points, got {xs.size}")
    direction = Direction(direction)
    sign = -1.0 if direction is Direction.DECREASING else 1.0
    pos = np.arange(xs.size, dtype=float)
    if np.all(xs == xs[0]):
        return 1.0
    if xs.size > _EXACT_MAX:
        alt = "less" if direction is Direction.DECREASING else "greater"
        return float(stats.spearmanr(pos, xs, alternative=alt).pvalue)

    def rho(v):
        ranks = stats.rankdata(v)
        return sign * float(np.corrcoef(pos, ranks)[0, 1])

    observed = rho(xs)
    perms = list(itertools.permutations(xs))
    hits = sum(1 for perm in perms if rho(np.array(perm)) >= observed - 1e-12)
    return hits / len(perms)
