"""Capacity regions of the generated- and chosen-secret identification systems.

A tuple ``(R_I, R_S, R_J, R_L)`` belongs to a region iff some ``alpha`` in
``(0, 1]`` satisfies three inequalities at once:

* ``R_I + R_S <= sum_rate_bound(alpha)``
* ``R_J >= storage_bound(alpha)``  (model dependent)
* ``R_L >= leakage_bound(alpha)``

Every bound is decreasing in ``alpha`` (see ``test_region.py`` for the checks),
so each inequality carves out an interval of ``alpha`` and membership reduces
to intersecting three intervals. The endpoints are found by bisection.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from bislab.gaussmodel import AuxiliaryParams, ChannelParams, UnscaledParams, to_scaled
from bislab.units import from_nats, to_nats

ALPHA_XTOL = 1e-12
ALPHA_MIN = 1e-12


class Model(str, enum.Enum):
    GENERATED = "generated"
    CHOSEN = "chosen"


class Plane(str, enum.Enum):
    RJ_RS = "rj_rs"
    RJ_RL = "rj_rl"


class BoundaryWarning(UserWarning):
    """Raised (as a warning) when a tuple sits on the region boundary to within
    the query tolerance. The tuple is still reported achievable."""


@dataclass(frozen=True)
class RateTuple:
    """Identification, secrecy, storage and privacy-leakage rates, in nats."""

    r_i: float
    r_s: float
    r_j: float
    r_l: float

    def __post_init__(self):
        for name in ("r_i", "r_s", "r_j", "r_l"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")

    @classmethod
    def from_base(cls, r_i, r_s, r_j, r_l, base: str = "nats") -> "RateTuple":
        return cls(*(to_nats(float(v), base) for v in (r_i, r_s, r_j, r_l)))


@dataclass(frozen=True)
class RegionQuery:
    model: Model
    params: Union[ChannelParams, UnscaledParams]
    tolerance: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")

    @property
    def channel(self) -> ChannelParams:
        if isinstance(self.params, UnscaledParams):
            return to_scaled(self.params)
        return self.params


@dataclass(frozen=True)
class Membership:
    achievable: bool
    alpha: Optional[float] = None
    interval: Optional[tuple[float, float]] = None
    boundary: bool = False


# Raw bounds in nats as functions of a float alpha in [0, 1]; alpha == 0 gives
# the limiting value. Written with log1p so that every bound is exactly zero
# (plus r_i) at alpha == 1.

def _sum_rate(c: float, alpha: float) -> float:
    return -0.5 * math.log1p(-c * (1.0 - alpha))


def _storage(model: Model, c: float, alpha: float, r_i: float) -> float:
    if alpha <= 0.0:
        return math.inf
    if model is Model.CHOSEN:
        return -0.5 * math.log(alpha)
    return 0.5 * math.log1p((1.0 - c) * (1.0 - alpha) / alpha) + r_i


def _leakage(r1: float, c: float, alpha: float, r_i: float) -> float:
    if r1 * (1.0 - alpha) >= 1.0:
        return math.inf
    return 0.5 * (math.log1p(-c * (1.0 - alpha)) - math.log1p(-r1 * (1.0 - alpha))) + r_i


def sum_rate_bound(p: ChannelParams, a: AuxiliaryParams, base: str = "nats") -> float:
    """Upper bound on ``R_I + R_S``; equals ``I(Z;U)``."""
    return from_nats(_sum_rate(p.product_sq, float(a.alpha)), base)


def storage_bound(model: Model, p: ChannelParams, a: AuxiliaryParams, r_i: float = 0.0,
                  base: str = "nats") -> float:
    """Lower bound on ``R_J``. ``r_i`` is given in ``base``."""
    r_i_nats = to_nats(r_i, base)
    return from_nats(_storage(Model(model), p.product_sq, float(a.alpha), r_i_nats), base)


def leakage_bound(p: ChannelParams, a: AuxiliaryParams, r_i: float = 0.0, base: str = "nats") -> float:
    """Lower bound on ``R_L``, the same for both models."""
    r_i_nats = to_nats(r_i, base)
    return from_nats(_leakage(float(p.rho1_sq), p.product_sq, float(a.alpha), r_i_nats), base)


def unscaled_region_bounds(p: UnscaledParams, a: AuxiliaryParams, r_i: float = 0.0,
                           model: Model = Model.GENERATED, base: str = "nats") -> tuple[float, float, float]:
    """``(sum_rate, storage, leakage)`` evaluated directly on the unscaled variances."""
    sx, s1, s2 = float(p.sigma_x_sq), float(p.sigma1_sq), float(p.sigma2_sq)
    alpha = float(a.alpha)
    r_i_nats = to_nats(r_i, base)
    prod = (sx + s1) * (sx + s2)
    den = alpha * sx * sx + sx * s1 + s1 * s2 + s2 * sx
    sum_rate = 0.5 * math.log(prod / den)
    if Model(model) is Model.CHOSEN:
        storage = 0.5 * math.log(1.0 / alpha)
    else:
        storage = 0.5 * math.log(den / (alpha * prod)) + r_i_nats
    leakage = 0.5 * math.log(den / ((alpha * sx + s1) * (sx + s2))) + r_i_nats
    return from_nats(sum_rate, base), from_nats(storage, base), from_nats(leakage, base)


def _bisect_decreasing(f: Callable[[float], float], target: float, xtol: float = ALPHA_XTOL) -> tuple[float, float]:
    """Bracket the crossing of a decreasing ``f`` with ``target`` on ``[0, 1]``.

    Returns ``(left, right)`` with ``f(left) >= target >= f(right)`` and
    ``right - left <= xtol``. Caller guarantees ``f(0) >= target >= f(1)``.
    """
    lo, hi = 0.0, 1.0
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _at_most_interval(f: Callable[[float], float], target: float) -> Optional[float]:
    """Smallest alpha (to within ``ALPHA_XTOL``, rounded inward) with ``f(alpha) <= target``,
    for decreasing ``f``. ``None`` when even ``alpha = 1`` fails."""
    if f(1.0) > target:
        return None
    if f(0.0) <= target:
        return 0.0
    return _bisect_decreasing(f, target)[1]


def _at_least_interval(f: Callable[[float], float], target: float) -> Optional[float]:
    """Largest alpha with ``f(alpha) >= target`` for decreasing ``f``; ``None`` if no
    positive alpha qualifies."""
    if f(1.0) >= target:
        return 1.0
    if not f(0.0) > target:
        return None
    left = _bisect_decreasing(f, target)[0]
    return left if left > 0.0 else None


def alpha_interval(t: RateTuple, model: Model, p: ChannelParams) -> Optional[tuple[float, float]]:
    """``(lo, hi)`` endpoints of the feasible alpha set, each rounded inward.

    ``None`` when one of the three inequalities admits no alpha at all. When the
    feasible set is a single point the rounded endpoints may cross by up to
    ``2 * ALPHA_XTOL``.
    """
    model = Model(model)
    c, r1 = p.product_sq, float(p.rho1_sq)
    hi = _at_least_interval(lambda al: _sum_rate(c, al), t.r_i + t.r_s)
    lo_j = _at_most_interval(lambda al: _storage(model, c, al, t.r_i), t.r_j)
    lo_l = _at_most_interval(lambda al: _leakage(r1, c, al, t.r_i), t.r_l)
    if hi is None or lo_j is None or lo_l is None:
        return None
    return max(lo_j, lo_l), hi


def is_achievable(t: RateTuple, q: RegionQuery) -> Membership:
    """Decide whether ``t`` lies in the region selected by ``q``.

    The witness alpha is the midpoint of the feasible interval. Tuples whose
    interval is narrower than ``q.tolerance`` are on the boundary: they are
    reported achievable and a ``BoundaryWarning`` is emitted.
    """
    interval = alpha_interval(t, q.model, q.channel)
    if interval is None:
        return Membership(False)
    lo, hi = interval
    if lo > hi + 2 * ALPHA_XTOL:
        return Membership(False, interval=interval)
    witness = min(max(0.5 * (lo + hi), ALPHA_XTOL), 1.0)
    boundary = hi - lo <= q.tolerance
    if boundary:
        warnings.warn(f"rate tuple lies on the region boundary (alpha interval width {hi - lo:.3g})",
                      BoundaryWarning, stacklevel=2)
    return Membership(True, alpha=witness, interval=interval, boundary=boundary)


@dataclass(frozen=True)
class Trace:
    """Boundary tuples parameterized by alpha (rates in nats)."""

    model: Model
    plane: Plane
    r_i: float
    alpha: np.ndarray
    r_s: np.ndarray
    r_j: np.ndarray
    r_l: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.r_s if self.plane is Plane.RJ_RS else self.r_l

    def points(self, base: str = "nats") -> np.ndarray:
        """``(grid, 2)`` polyline of ``(r_j, value)``."""
        return np.column_stack([from_nats(self.r_j, base), from_nats(self.values, base)])

    def tuples(self) -> list[RateTuple]:
        return [RateTuple(self.r_i, max(s, 0.0), j, l)
                for s, j, l in zip(self.r_s, self.r_j, self.r_l)]


def is_monotone(xs, ys) -> bool:
    """Both coordinates nondecreasing along the polyline."""
    xs, ys = np.asarray(xs), np.asarray(ys)
    return bool(np.all(np.diff(xs) >= 0) and np.all(np.diff(ys) >= 0))


def boundary_trace(q: RegionQuery, r_i: float = 0.0, plane: Plane = Plane.RJ_RS, grid: int = 200,
                   alpha_min: float = ALPHA_MIN, base: str = "nats") -> Trace:
    """Trace the boundary tuples ``(R_I, R_S*, R_J, R_L)`` as alpha sweeps down
    log-uniformly from its largest useful value to ``alpha_min``.

    For ``r_i > 0`` the sweep starts where the secrecy budget hits zero, so
    every emitted tuple has ``R_S >= 0``.
    """
    if grid < 2:
        raise ValueError(f"grid must be >= 2, got {grid}")
    model, plane = Model(q.model), Plane(plane)
    p = q.channel
    c, r1 = p.product_sq, float(p.rho1_sq)
    r_i_nats = to_nats(r_i, base)
    alpha_top = _at_least_interval(lambda al: _sum_rate(c, al), r_i_nats)
    if alpha_top is None or alpha_top <= alpha_min:
        raise ValueError("identification rate leaves no secrecy budget for any alpha")
    alphas = np.geomspace(alpha_top, alpha_min, grid)
    r_s = np.array([_sum_rate(c, al) - r_i_nats for al in alphas])
    r_j = np.array([_storage(model, c, al, r_i_nats) for al in alphas])
    r_l = np.array([_leakage(r1, c, al, r_i_nats) for al in alphas])
    return Trace(model, plane, r_i_nats, alphas, r_s, r_j, r_l)
