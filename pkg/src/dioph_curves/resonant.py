"""Enumeration and counting of shifted rational points near a curve.

A candidate is a pair ``(p1, q)`` with ``x = (p1 + theta1)/q`` in the
window; its partner ``p2`` is the integer nearest to ``q f(x) - theta2`` and
its distance is ``||q f(x) - theta2||``.  All work is an outer loop over q
with a vectorised inner loop over p1, split into q-chunks that may run on a
thread pool; chunk results are concatenated in q order, so the output does
not depend on the thread count.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np

from ._validation import (
    ValidationError,
    as_fraction,
    as_theta,
    check_interval,
    check_positive,
    check_positive_int,
)
from .curves import Curve, PolynomialCurve

__all__ = [
    "StrictFloat",
    "ExactRational",
    "parse_policy",
    "ResonantPoint",
    "ShiftedQuery",
    "ComputeGuard",
    "enumerate_AQ",
    "enumerate_arrays",
    "count_N",
    "brute_force_oracle",
    "ORACLE_MAX_Q",
]

ORACLE_MAX_Q = 2**9
CHUNK_ELEMENTS = 1 << 21
_NEAR_INT = 1e-9


class ComputeGuard(RuntimeError):
    """A run was refused because it exceeds a safety cap."""


@dataclass(frozen=True)
class StrictFloat:
    """Float64 evaluation; strict ``a < b`` is tested as ``a < b - tau``."""

    tau: float = 1e-12

    def __str__(self):
        return f"strict:{self.tau:g}"


@dataclass(frozen=True)
class ExactRational:
    """Rational arithmetic for polynomial curves; no tolerance."""

    tau: float = 0.0

    def __str__(self):
        return "exact"


def parse_policy(text) -> StrictFloat | ExactRational:
    if isinstance(text, (StrictFloat, ExactRational)):
        return text
    text = str(text).strip().lower()
    if text in ("exact", "exactrational", "rational"):
        return ExactRational()
    if text in ("strict", "strictfloat", "float"):
        return StrictFloat()
    if text.startswith("strict:"):
        return StrictFloat(float(text.split(":", 1)[1]))
    raise ValidationError(f"unknown tolerance policy {text!r}")


@dataclass(frozen=True, order=True)
class ResonantPoint:
    q: int
    p1: int
    p2: int
    x: float = field(compare=False)
    residual: float = field(compare=False)

    @property
    def weight(self) -> int:
        return self.q


def default_threads() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# shared machinery


def exact_p_range(qs: np.ndarray, lo: float, hi: float, frac1: Fraction):
    """Integer bounds of ``p`` with ``lo <= (p + frac1)/q <= hi``.

    Float estimates are corrected in exact arithmetic wherever they sit
    within 1e-9 of an integer.
    """
    qs = np.asarray(qs, dtype=np.int64)
    f1 = float(frac1)
    a = qs * lo - f1
    b = qs * hi - f1
    p_lo = np.ceil(a).astype(np.int64)
    p_hi = np.floor(b).astype(np.int64)
    lo_x, hi_x = as_fraction(lo), as_fraction(hi)
    for vals, out, exact_lo in ((a, p_lo, True), (b, p_hi, False)):
        near = np.nonzero(np.abs(vals - np.rint(vals)) < _NEAR_INT)[0]
        for i in near:
            q = int(qs[i])
            v = q * (lo_x if exact_lo else hi_x) - frac1
            out[i] = math.ceil(v) if exact_lo else math.floor(v)
    return p_lo, p_hi


def q_chunks(q_start: int, q_stop: int, width: float, budget: int = CHUNK_ELEMENTS):
    """Split ``range(q_start, q_stop)`` into chunks of bounded candidate count.

    Boundaries depend only on the arguments, never on the thread count.
    """
    if q_stop <= q_start:
        return []
    qs = np.arange(q_start, q_stop, dtype=np.float64)
    cum = np.cumsum(qs * width + 2)
    cuts = np.searchsorted(cum, np.arange(budget, cum[-1], budget), side="right")
    edges = sorted(set([0, *cuts.tolist(), len(qs)]))
    return [(q_start + a, q_start + b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_chunks(fn: Callable, chunks, threads: int | None):
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def expand_candidates(qs, p_lo, p_hi):
    """Flattened ``(q, p)`` arrays for all ``p_lo[i] <= p <= p_hi[i]``."""
    n = np.maximum(p_hi - p_lo + 1, 0)
    total = int(n.sum())
    q_rep = np.repeat(qs, n)
    start = np.repeat(p_lo - np.concatenate([[0], np.cumsum(n)[:-1]]), n)
    p = start + np.arange(total, dtype=np.int64)
    return q_rep, p


def _validate_window(curve: Curve, window):
    lo, hi = check_interval(window, "window", allow_empty=True)
    I_lo, I_hi = curve.interval
    if lo < I_lo or hi > I_hi:
        raise ValidationError(f"window [{lo}, {hi}] is not inside the curve interval {curve.interval}")
    return lo, hi


# ---------------------------------------------------------------------------
# queries


@dataclass(frozen=True)
class ShiftedQuery:
    """Parameters of one enumeration.

    Exactly one of ``threshold`` and ``delta`` is set.  ``threshold`` bounds
    the absolute residual ``|f(x) - (p2 + theta2)/q|`` and may be a float or
    a callable of the q-array; ``delta`` bounds ``||q f(x) - theta2||``.
    ``lower`` picks the denominator range: ``"half"`` for ``Q/2 < q <= Q``,
    ``"overu"`` for ``Q/u(Q) < q <= Q`` and ``"all"`` for ``1 <= q <= Q``.
    """

    curve: Curve
    Q: int
    window: tuple | None = None
    lower: str = "all"
    threshold: float | Callable | None = None
    delta: float | None = None
    theta: tuple = (0, 0)
    policy: StrictFloat | ExactRational = StrictFloat()
    u: Callable | None = None

    def __post_init__(self):
        object.__setattr__(self, "Q", check_positive_int(self.Q, "Q"))
        window = self.curve.interval if self.window is None else self.window
        object.__setattr__(self, "window", _validate_window(self.curve, window))
        object.__setattr__(self, "theta", as_theta(self.theta))
        object.__setattr__(self, "policy", parse_policy(self.policy))
        if self.lower not in ("half", "overu", "all"):
            raise ValidationError(f"unknown lower mode {self.lower!r}")
        if self.lower == "overu" and self.u is None:
            raise ValidationError("lower mode 'overu' needs a u function")
        if (self.threshold is None) == (self.delta is None):
            raise ValidationError("set exactly one of threshold and delta")
        if self.delta is not None:
            check_positive(self.delta, "delta")
            if self.delta >= 0.5:
                warnings.warn("delta >= 1/2: every candidate qualifies", stacklevel=3)
        elif not callable(self.threshold):
            check_positive(self.threshold, "threshold")
            if self.threshold >= 0.5:
                warnings.warn("threshold >= 1/2: every candidate qualifies", stacklevel=3)
        if isinstance(self.policy, ExactRational):
            if not isinstance(self.curve, PolynomialCurve):
                raise ValidationError("exact rational policy needs a polynomial curve")
            if callable(self.threshold):
                raise ValidationError("exact rational policy needs a constant threshold")

    @property
    def q_start(self) -> int:
        if self.lower == "all":
            return 1
        if self.lower == "half":
            return self.Q // 2 + 1
        bound = Fraction(self.Q) / as_fraction(float(self.u(self.Q)))
        return max(1, math.floor(bound) + 1)


def _float_chunk(query: ShiftedQuery, frac, chunk, collect: bool):
    curve = query.curve
    lo, hi = query.window
    f1, f2 = float(frac[0]), float(frac[1])
    qs = np.arange(chunk[0], chunk[1], dtype=np.int64)
    p_lo, p_hi = exact_p_range(qs, lo, hi, frac[0])
    q_rep, p = expand_candidates(qs, p_lo, p_hi)
    if q_rep.size == 0:
        return (0, None) if not collect else (0, _empty())
    qf = q_rep.astype(float)
    x = (p + f1) / qf
    y = qf * curve.f(x) - f2
    if not np.all(np.isfinite(y)):
        raise ValidationError("curve is not finite on the window")
    p2 = np.floor(y + 0.5)
    dist = np.abs(y - p2)
    tau = query.policy.tau
    if query.delta is not None:
        keep = dist < query.delta - tau
    else:
        thr = query.threshold(qf) if callable(query.threshold) else query.threshold
        keep = dist / qf < thr - tau
    if not collect:
        return int(np.count_nonzero(keep)), None
    return int(np.count_nonzero(keep)), (q_rep[keep], p[keep], p2[keep].astype(np.int64),
                                         x[keep], (dist / qf)[keep])


def _decimal(value) -> Fraction:
    # the exact policy reads a float cut-off as its shortest decimal, so 0.1 is 1/10
    return Fraction(repr(float(value))) if isinstance(value, float) else as_fraction(value)


def _empty():
    z = np.empty(0, dtype=np.int64)
    return (z, z, z, np.empty(0), np.empty(0))


def _exact_chunk(query: ShiftedQuery, frac, chunk, collect: bool):
    curve: PolynomialCurve = query.curve
    lo, hi = query.window
    qs = np.arange(chunk[0], chunk[1], dtype=np.int64)
    p_lo, p_hi = exact_p_range(qs, lo, hi, frac[0])
    q_rep, p = expand_candidates(qs, p_lo, p_hi)
    if q_rep.size == 0:
        return (0, None) if not collect else (0, _empty())
    # x = (p b1 + a1) / (q b1); q f(x) - theta2 = N / D with integer N, D
    a1, b1 = frac[0].numerator, frac[0].denominator
    a2, b2 = frac[1].numerator, frac[1].denominator
    coeffs = curve.coeffs
    d = math.lcm(*(c.denominator for c in coeffs))
    nk = [int(c * d) for c in coeffs]
    deg = len(coeffs) - 1
    qo = q_rep.astype(object)
    X = p.astype(object) * b1 + a1
    qb = qo * b1
    S = np.zeros(q_rep.size, dtype=object)
    for k in range(deg, -1, -1):  # Horner in X with (q b1) weights
        S = S * X + nk[k] * qb ** (deg - k) if k < deg else S + nk[k]
    # S = sum_k n_k X^k (q b1)^(deg - k)
    D = d * qb**deg * b2
    N = qo * S * b2 - a2 * d * qb**deg
    p2 = (2 * N + D) // (2 * D)
    dist_num = abs(N - p2 * D)
    if query.delta is not None:
        dl = _decimal(query.delta)
        keep = dist_num * dl.denominator < dl.numerator * D
    else:
        th = _decimal(query.threshold)
        keep = dist_num * th.denominator < th.numerator * qo * D
    keep = keep.astype(bool)
    n = int(np.count_nonzero(keep))
    if not collect:
        return n, None
    qk = q_rep[keep]
    x = ((p[keep] + float(frac[0])) / qk)
    resid = np.array([float(Fraction(int(a), int(b))) for a, b in zip(dist_num[keep], D[keep])])
    return n, (qk, p[keep], p2[keep].astype(np.int64), x, resid / qk)


def _scan(query: ShiftedQuery, collect: bool, threads: int | None):
    m1, m2 = math.floor(query.theta[0]), math.floor(query.theta[1])
    frac = (query.theta[0] - m1, query.theta[1] - m2)
    lo, hi = query.window
    start = query.q_start
    if start > query.Q or hi < lo:
        return 0, _empty() if collect else None
    chunks = q_chunks(start, query.Q + 1, hi - lo)
    worker = _exact_chunk if isinstance(query.policy, ExactRational) else _float_chunk
    parts = run_chunks(lambda c: worker(query, frac, c, collect), chunks, threads)
    total = sum(n for n, _ in parts)
    if not collect:
        return total, None
    arrays = [np.concatenate(cols) for cols in zip(*(a for _, a in parts))]
    q, p1, p2, x, r = arrays
    # undo the integer part of theta
    return total, (q, p1 - m1, p2 - m2, x, r)


def enumerate_arrays(query: ShiftedQuery, threads: int | None = None):
    """Columns ``(q, p1, p2, x, residual)`` of the points, sorted by (q, p1)."""
    return _scan(query, True, threads)[1]


def enumerate_AQ(query: ShiftedQuery, threads: int | None = None) -> list:
    """All shifted rational points of the query as :class:`ResonantPoint`."""
    q, p1, p2, x, r = enumerate_arrays(query, threads)
    return [ResonantPoint(int(a), int(b), int(c), float(d), float(e))
            for a, b, c, d, e in zip(q, p1, p2, x, r)]


def count_query(query: ShiftedQuery, threads: int | None = None) -> int:
    return _scan(query, False, threads)[0]


def count_N(curve: Curve, interval, Q: int, delta: float, theta=(0, 0),
            policy=StrictFloat(), threads: int | None = None) -> int:
    """``#{(a, q): q <= Q, (a + theta1)/q in I, ||q f((a + theta1)/q) - theta2|| < delta}``."""
    delta = check_positive(delta, "delta")
    if delta >= 0.5:
        raise ValidationError(f"delta must lie in (0, 1/2), got {delta}")
    query = ShiftedQuery(curve, Q, window=interval, lower="all", delta=delta,
                         theta=theta, policy=policy)
    return count_query(query, threads)


# ---------------------------------------------------------------------------
# oracle


def _scalar_f(curve: Curve):
    if isinstance(curve, PolynomialCurve):
        cs = [float(c) for c in curve.coeffs]

        def f(x):
            acc = 0.0
            for c in reversed(cs):
                acc = acc * x + c
            return acc

        return f
    return lambda x: float(curve.f(np.float64(x)))


def brute_force_oracle(curve: Curve, interval, Q: int, delta: float, theta=(0, 0),
                       policy=StrictFloat()) -> int:
    """Independent scalar recount of :func:`count_N` for ``Q <= 512``.

    Plain Python loops over every ``(a, q)`` in a padded range, exact
    rational window membership, scalar float residuals, and a 50-digit
    mpmath re-evaluation for any residual within 1e-9 of the cut-off.
    """
    Q = check_positive_int(Q, "Q")
    if Q > ORACLE_MAX_Q:
        raise ComputeGuard(f"oracle refuses Q = {Q} > {ORACLE_MAX_Q}")
    lo, hi = _validate_window(curve, interval)
    if hi < lo:
        return 0
    policy = parse_policy(policy)
    t1, t2 = as_theta(theta)
    m1, m2 = math.floor(t1), math.floor(t2)
    f1x, f2x = t1 - m1, t2 - m2
    f1, f2 = float(f1x), float(f2x)
    lo_x, hi_x = as_fraction(lo), as_fraction(hi)
    cut = delta - policy.tau
    dl = _decimal(delta)
    f = _scalar_f(curve)
    exact = isinstance(policy, ExactRational)
    count = 0
    for q in range(1, Q + 1):
        a_min = math.ceil(q * lo_x - f1x)
        a_max = math.floor(q * hi_x - f1x)
        for a in range(a_min - 2, a_max + 3):
            num = a + f1x
            if num < q * lo_x or num > q * hi_x:
                continue
            if exact:
                y = q * curve.f_exact(num / q) - f2x
                if abs(y - round(y)) < dl:
                    count += 1
                continue
            x = (a + f1) / q
            y = q * f(x) - f2
            dist = abs(y - round(y))
            if abs(dist - cut) < _NEAR_INT * max(1.0, abs(y)):
                with mpmath.workdps(50):
                    xm = (mpmath.mpf(a) + mpmath.mpf(f1x.numerator) / f1x.denominator) / q
                    ym = q * curve.f_mp(xm) - mpmath.mpf(f2x.numerator) / f2x.denominator
                    dm = abs(ym - mpmath.nint(ym))
                    hit = dm < mpmath.mpf(delta) - mpmath.mpf(policy.tau)
            else:
                hit = dist < cut
            count += bool(hit)
    return count
