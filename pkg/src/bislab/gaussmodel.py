"""Gaussian source and channel model.

Standardized model: ``X ~ N(0, 1)``, ``Y = rho1 X + N1``, ``Z = rho2 X + N2``
with ``N1 ~ N(0, 1 - rho1^2)`` and ``N2 ~ N(0, 1 - rho2^2)``. Because of the
Markov chain ``Y - X - Z`` the same joint law can be generated backwards from
``Y``: ``X = rho1 Y + N1'``, ``Z = rho2 X + N2``. Both samplers are provided.

Random numbers come from numpy's PCG64 bit generator and its ziggurat normal
sampler (``Generator.standard_normal``). Streams are keyed by integer tuples
``(seed, *keys)`` through ``numpy.random.SeedSequence``, which is what lets
trials be partitioned across workers without changing the aggregate output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real
from typing import Union

import numpy as np

from bislab.units import from_nats

SeedLike = Union[int, np.random.Generator]


@dataclass(frozen=True)
class ChannelParams:
    """Squared correlations of the enrollment (``rho1_sq``) and identification
    (``rho2_sq``) channels. ``rho1_sq == 1`` is noiseless enrollment."""

    rho1_sq: Real
    rho2_sq: Real

    def __post_init__(self):
        if not (0 < self.rho1_sq <= 1):
            raise ValueError(f"rho1_sq must lie in (0, 1], got {self.rho1_sq}")
        if not (0 < self.rho2_sq < 1):
            raise ValueError(f"rho2_sq must lie in (0, 1), got {self.rho2_sq}")

    @property
    def rho1(self) -> float:
        return math.sqrt(self.rho1_sq)

    @property
    def rho2(self) -> float:
        return math.sqrt(self.rho2_sq)

    @property
    def product_sq(self) -> float:
        """``rho1^2 rho2^2``, the squared correlation between Y and Z."""
        return float(self.rho1_sq) * float(self.rho2_sq)

    def covariance(self) -> np.ndarray:
        """Population covariance of ``(X, Y, Z)``."""
        r1, r2 = self.rho1, self.rho2
        return np.array([[1.0, r1, r2], [r1, 1.0, r1 * r2], [r2, r1 * r2, 1.0]])


@dataclass(frozen=True)
class UnscaledParams:
    """Unscaled model ``X ~ N(0, sigma_x_sq)``, ``Y = X + D1``, ``Z = X + D2``."""

    sigma_x_sq: Real
    sigma1_sq: Real
    sigma2_sq: Real

    def __post_init__(self):
        for name in ("sigma_x_sq", "sigma1_sq", "sigma2_sq"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.sigma_x_sq <= 0:
            raise ValueError(f"sigma_x_sq must be > 0, got {self.sigma_x_sq}")
        if self.sigma1_sq < 0:
            raise ValueError(f"sigma1_sq must be >= 0, got {self.sigma1_sq}")
        if self.sigma2_sq <= 0:
            raise ValueError(f"sigma2_sq must be > 0, got {self.sigma2_sq}")

    @property
    def backward_noise_var(self) -> Real:
        """Variance of ``D1'`` in ``X = sx/(sx+s1) Y + D1'``."""
        sx, s1 = self.sigma_x_sq, self.sigma1_sq
        return sx * s1 / (sx + s1)


@dataclass(frozen=True)
class AuxiliaryParams:
    """Test-channel parameter: ``Y = U + Phi``, ``U ~ N(0, 1 - alpha)``,
    ``Phi ~ N(0, alpha)``."""

    alpha: Real

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class TripleBlocks:
    """``count`` blocks of length ``n``; each array has shape ``(count, n)``.

    Column ``k`` of block ``b`` is one ``(x, y, z)`` triple.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def stacked(self) -> np.ndarray:
        """All triples as a ``(count * n, 3)`` array."""
        return np.column_stack([self.x.ravel(), self.y.ravel(), self.z.ravel()])


def to_scaled(p: UnscaledParams) -> ChannelParams:
    """Standardize an unscaled model. Fractions in, fractions out."""
    sx = p.sigma_x_sq
    return ChannelParams(rho1_sq=sx / (sx + p.sigma1_sq), rho2_sq=sx / (sx + p.sigma2_sq))


def make_rng(seed: SeedLike, *keys: int) -> np.random.Generator:
    """Generator for the stream ``(seed, *keys)``.

    A ``Generator`` passed as ``seed`` is returned unchanged (``keys`` must be
    empty), so callers can thread one generator through several samplers.
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("stream keys cannot be combined with an existing Generator")
        return seed
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def _check_shape(n: int, count: int) -> None:
    if n < 1 or count < 1:
        raise ValueError(f"n and count must be >= 1, got n={n}, count={count}")


def sample_forward(p: ChannelParams, n: int, count: int, seed: SeedLike, stream: int = 0) -> TripleBlocks:
    """Draw ``X`` first, then both observations through their channels."""
    _check_shape(n, count)
    rng = make_rng(seed, stream) if not isinstance(seed, np.random.Generator) else seed
    x = rng.standard_normal((count, n))
    n1 = rng.standard_normal((count, n)) * math.sqrt(1.0 - float(p.rho1_sq))
    n2 = rng.standard_normal((count, n)) * math.sqrt(1.0 - float(p.rho2_sq))
    y = p.rho1 * x + n1
    z = p.rho2 * x + n2
    return TripleBlocks(x, y, z)


def sample_converted(p: ChannelParams, n: int, count: int, seed: SeedLike, stream: int = 0) -> TripleBlocks:
    """Draw ``Y`` first and generate ``X`` through the backward channel."""
    _check_shape(n, count)
    rng = make_rng(seed, stream) if not isinstance(seed, np.random.Generator) else seed
    y = rng.standard_normal((count, n))
    n1b = rng.standard_normal((count, n)) * math.sqrt(1.0 - float(p.rho1_sq))
    n2 = rng.standard_normal((count, n)) * math.sqrt(1.0 - float(p.rho2_sq))
    x = p.rho1 * y + n1b
    z = p.rho2 * x + n2
    return TripleBlocks(x, y, z)


def _half_log_inv(v: float) -> float:
    """``0.5 * log(1 / v)`` in nats, ``inf`` at ``v == 0``."""
    if v <= 0.0:
        return math.inf
    return -0.5 * math.log(v)


def mi_xy(p: ChannelParams, base: str = "nats") -> float:
    """I(X;Y). Infinite for noiseless enrollment."""
    return from_nats(_half_log_inv(1.0 - float(p.rho1_sq)), base)


def mi_zy(p: ChannelParams, base: str = "nats") -> float:
    """I(Z;Y): the composite noise ``rho2 N1' + N2`` has variance ``1 - rho1^2 rho2^2``."""
    return from_nats(_half_log_inv(1.0 - p.product_sq), base)


def mi_yu(a: AuxiliaryParams, base: str = "nats") -> float:
    return from_nats(_half_log_inv(float(a.alpha)), base)


def mi_xu(p: ChannelParams, a: AuxiliaryParams, base: str = "nats") -> float:
    r1 = float(p.rho1_sq)
    return from_nats(_half_log_inv(float(a.alpha) * r1 + 1.0 - r1), base)


def mi_zu(p: ChannelParams, a: AuxiliaryParams, base: str = "nats") -> float:
    c = p.product_sq
    return from_nats(_half_log_inv(float(a.alpha) * c + 1.0 - c), base)
