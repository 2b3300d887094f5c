"""Secrecy and privacy-leakage as functions of the storage rate (R_I = 0,
generated-secret model), with their large-storage limits and zero-rate slopes.

The storage rate enters through ``b ** (2 * r_j)`` where ``b`` is the radix of
the rate base, so ``max_secrecy(p, rj_of_alpha(p, a))`` reproduces
``sum_rate_bound(p, a)`` in any base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from bislab.gaussmodel import AuxiliaryParams, ChannelParams, mi_xy, mi_zy
from bislab.units import from_nats, to_nats


@dataclass(frozen=True)
class ExampleSet:
    label: str
    cases: tuple[ChannelParams, ChannelParams, ChannelParams]


F = Fraction

EXAMPLES: tuple[ExampleSet, ...] = (
    ExampleSet("Ex1", (ChannelParams(F(3, 4), F(2, 3)), ChannelParams(F(7, 8), F(2, 3)),
                       ChannelParams(F(15, 16), F(2, 3)))),
    ExampleSet("Ex2", (ChannelParams(F(3, 4), F(2, 3)), ChannelParams(F(9, 10), F(7, 8)),
                       ChannelParams(F(15, 16), F(11, 12)))),
    ExampleSet("Ex3", (ChannelParams(F(3, 4), F(2, 3)), ChannelParams(F(3, 4), F(8, 9)),
                       ChannelParams(F(3, 4), F(14, 15)))),
)

CASE_LABELS = ("a", "b", "c")


def rj_of_alpha(p: ChannelParams, a: AuxiliaryParams, base: str = "nats") -> float:
    """Storage rate on the boundary at ``alpha`` (R_I = 0)."""
    c, al = p.product_sq, float(a.alpha)
    return from_nats(0.5 * math.log1p((1.0 - c) * (1.0 - al) / al), base)


def alpha_of_rj(p: ChannelParams, r_j: float, base: str = "nats") -> float:
    """Inverse of :func:`rj_of_alpha`."""
    c = p.product_sq
    g = math.exp(2.0 * to_nats(r_j, base))
    return (1.0 - c) / (g - c)


def _decay(r_j: float, base: str) -> float:
    """``b ** (-2 r_j)``."""
    return math.exp(-2.0 * to_nats(r_j, base))


def max_secrecy(p: ChannelParams, r_j: float, base: str = "nats") -> float:
    if r_j < 0:
        raise ValueError(f"r_j must be >= 0, got {r_j}")
    c = p.product_sq
    return from_nats(0.5 * math.log((1.0 - c * _decay(r_j, base)) / (1.0 - c)), base)


def min_leakage(p: ChannelParams, r_j: float, base: str = "nats") -> float:
    if r_j < 0:
        raise ValueError(f"r_j must be >= 0, got {r_j}")
    c, r1, r2 = p.product_sq, float(p.rho1_sq), float(p.rho2_sq)
    den = 1.0 - r1 + r1 * (1.0 - r2) * _decay(r_j, base)
    return from_nats(0.5 * math.log((1.0 - c) / den), base)


def secrecy_limit(p: ChannelParams, base: str = "nats") -> float:
    """Secrecy rate as storage grows without bound: I(Y;Z)."""
    return mi_zy(p, base)


def leakage_limit(p: ChannelParams, base: str = "nats") -> float:
    """Leakage as storage grows without bound: I(X;Y) - I(Z;Y), infinite when
    ``rho1_sq == 1``."""
    if float(p.rho1_sq) >= 1.0:
        return math.inf
    return mi_xy(p, base) - mi_zy(p, base)


def secrecy_slope(p: ChannelParams) -> float:
    """d max_secrecy / d r_j at r_j = 0 (base free)."""
    c = p.product_sq
    return c / (1.0 - c)


def leakage_slope(p: ChannelParams) -> float:
    """d min_leakage / d r_j at r_j = 0 (base free)."""
    r1, r2 = float(p.rho1_sq), float(p.rho2_sq)
    return r1 * (1.0 - r2) / (1.0 - p.product_sq)


def round_half_up(value: float, places: int = 2) -> float:
    """Round half away from zero, e.g. 0.125 -> 0.13."""
    quant = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quant, rounding=ROUND_HALF_UP))


def make_tables(examples=EXAMPLES, base: str = "bits", places: int = 2):
    """Large-storage limits and zero-rate slopes for every example case.

    Returns ``(limits, slopes)``, each a list of rows (one per example set) of
    six numbers: the three secrecy values followed by the three leakage values.
    """
    limits, slopes = [], []
    for ex in examples:
        limits.append([round_half_up(secrecy_limit(p, base), places) for p in ex.cases]
                      + [round_half_up(leakage_limit(p, base), places) for p in ex.cases])
        slopes.append([round_half_up(secrecy_slope(p), places) for p in ex.cases]
                      + [round_half_up(leakage_slope(p), places) for p in ex.cases])
    return limits, slopes
