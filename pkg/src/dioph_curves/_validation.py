"""Input validation helpers shared across modules."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Real

import numpy as np

# Ties at construction time are resolved with this slack.
CONSTRUCTION_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ValidationError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_positive(value, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_interval(interval, name: str = "interval", allow_empty: bool = False):
    try:
        lo, hi = (float(v) for v in interval)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a pair (lo, hi), got {interval!r}") from exc
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError(f"{name} endpoints must be finite")
    if hi <= lo and not allow_empty:
        raise ValidationError(f"{name} is empty: [{lo}, {hi}]")
    return lo, hi


def as_fraction(value) -> Fraction:
    """Exact rational value of ``value``.

    Floats convert exactly (binary expansion); strings go through
    ``Fraction(str)`` so ``"0.3"`` means 3/10, not the nearest double.
    """
    if isinstance(value, Fraction):
        # numpy integer parts would overflow in later arithmetic
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Real):
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(f"non-finite value {value!r}")
        return Fraction(value)
    raise ValidationError(f"cannot interpret {value!r} as a real number")


def as_theta(theta) -> tuple[Fraction, Fraction]:
    """Validate an inhomogeneous shift and return it as exact rationals."""
    if theta is None:
        return Fraction(0), Fraction(0)
    if isinstance(theta, str):
        theta = theta.split(",")
    try:
        t1, t2 = theta
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"theta must be a pair, got {theta!r}") from exc
    return as_fraction(t1), as_fraction(t2)


def split_theta(theta):
    """Split each shift into an integer part and a float fractional part.

    The fractional parts are computed exactly before rounding to float, so
    shifting ``theta`` by integers changes only the integer parts.
    """
    t1, t2 = as_theta(theta)
    m1, m2 = math.floor(t1), math.floor(t2)
    return (m1, m2), (float(t1 - m1), float(t2 - m2))
