"""Rate units.

All rates are carried in nats internally. The ``base`` argument accepted by the
public functions only affects the value handed back to the caller.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

BASES = {"nats": math.e, "bits": 2.0}

Number = Union[int, float, Fraction]


def log_base(base: str) -> float:
    """Natural log of the radix named by ``base``."""
    try:
        return math.log(BASES[base])
    except KeyError:
        raise ValueError(f"unknown rate base {base!r}; expected one of {sorted(BASES)}") from None


def from_nats(value: float, base: str = "nats") -> float:
    return value / log_base(base)


def to_nats(value: float, base: str = "nats") -> float:
    return value * log_base(base)


def parse_number(text: str) -> Fraction:
    """Parse ``"3/4"`` or ``"0.75"`` exactly.

    Raises ``ValueError`` on anything that is not a finite rational.
    """
    text = text.strip()
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number or fraction: {text!r}") from None
    return value
