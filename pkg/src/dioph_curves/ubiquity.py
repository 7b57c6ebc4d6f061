"""Ubiquity wiring and empirical local-ubiquity coverage.

Resonant points ``((p1 + theta1)/q, (p2 + theta2)/q)`` near the curve carry
the weight ``q``.  Balls of radius ``C/(Q^2 psi(Q))`` around their
x-coordinates should cover at least half of any window once Q is large;
:func:`verify_local_ubiquity` measures how much they actually cover.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import ValidationError, check_interval, check_positive_int
from .curves import Curve
from .funcs import ApproximatingFunction
from .resonant import ShiftedQuery, StrictFloat, enumerate_arrays
from .series import Verdict, classify_lebesgue

__all__ = [
    "DEFAULT_C_GRID",
    "default_u",
    "UbiquityWiring",
    "CoverageReport",
    "Staircase",
    "StaircaseIncomplete",
    "PartialSumU",
    "interval_union_measure",
    "build_u_staircase",
    "build_u_partial_sums",
    "verify_local_ubiquity",
    "minimal_C",
]

DEFAULT_C_GRID = tuple(2.0**k for k in range(9))


def default_u(t):
    """Neutral slowly growing choice ``log2(2 + t)``."""
    return np.log2(2.0 + np.asarray(t, dtype=float))


@dataclass(frozen=True)
class UbiquityWiring:
    """The functions ``Phi``, ``Psi``, ``rho`` and ``u`` with dyadic base 2.

    The weight of a resonant point is its denominator q.
    """

    psi: ApproximatingFunction
    psi1: ApproximatingFunction | None = None
    u: Callable = default_u
    k: int = 2

    def Phi(self, t):
        t = np.asarray(t, dtype=float)
        return self.psi(t) / t

    def Psi(self, t):
        t = np.asarray(t, dtype=float)
        return (self.psi1 or self.psi)(t) / t

    def rho(self, t):
        t = np.asarray(t, dtype=float)
        return self.u(t) / (t**2 * self.psi(t))

    def check_halving(self, t_max: int = 40) -> bool:
        """``Psi(2^(t+1)) <= Psi(2^t)/2`` for ``t < t_max``."""
        t = 2.0 ** np.arange(t_max + 1)
        P = self.Psi(t)
        return bool(np.all(P[1:] <= 0.5 * P[:-1] * (1 + 1e-12)))

    def check_u_unbounded(self, bound: float, t_max: int = 1000) -> bool:
        """Does ``u(2^t)`` exceed ``bound`` for some ``t <= t_max``?"""
        return bool(np.any(self.u(2.0 ** np.arange(t_max + 1)) > bound))

    def check_u_nondecreasing(self, t_max: int = 60) -> bool:
        vals = self.u(np.arange(1, 2**12, dtype=float))
        big = self.u(2.0 ** np.arange(t_max + 1))
        return bool(np.all(np.diff(vals) >= 0) and np.all(np.diff(big) >= 0))


@dataclass(frozen=True)
class CoverageReport:
    J: tuple
    Q: int
    C: float
    covered: float
    fraction: float
    points: int
    minimal: bool = False

    def row(self) -> dict:
        return {"Q": self.Q, "C": self.C, "fraction": self.fraction,
                "minimal_C_flag": int(self.minimal), "points_used": self.points}


def interval_union_measure(lo, hi, window=None) -> float:
    """Length of the union of closed intervals ``[lo[i], hi[i]]``.

    Intervals are clipped to ``window`` when given.  Sort by left end, carry
    the running maximum of right ends, and add up the disjoint components.
    """
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    if lo.shape != hi.shape:
        raise ValidationError("endpoint arrays differ in length")
    if window is not None:
        a, b = window
        lo, hi = np.maximum(lo, a), np.minimum(hi, b)
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return 0.0
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    starts = np.concatenate([[True], lo[1:] > reach[:-1]])
    first = np.nonzero(starts)[0]
    last = np.concatenate([first[1:] - 1, [lo.size - 1]])
    return math.fsum((reach[last] - lo[first]).tolist())


# ---------------------------------------------------------------------------
# u constructions


class StaircaseIncomplete(RuntimeError):
    """Partial sums stopped short of closing another block."""

    def __init__(self, blocks: int, message: str):
        super().__init__(message)
        self.blocks = blocks


@dataclass(frozen=True)
class Staircase:
    """``u(l) = i`` on the i-th block; ``ends[i-1]`` is the last l of block i.

    Past the final closed block u takes the next integer.
    """

    ends: np.ndarray
    start: int = 1

    def __call__(self, l):
        l = np.asarray(l)
        out = np.searchsorted(self.ends, l, side="left") + 1
        return out if out.ndim else int(out)

    @property
    def blocks(self) -> int:
        return len(self.ends)

    @property
    def boundaries(self) -> list:
        return [self.start] + [int(e) + 1 for e in self.ends]


def build_u_staircase(term: Callable, n_terms: int = 10**6, start: int = 1,
                      min_blocks: int = 2) -> Staircase:
    """Greedy blocks of consecutive l, each closing once its sum exceeds 1.

    Raises :class:`StaircaseIncomplete` when fewer than ``min_blocks``
    blocks close within ``n_terms`` terms.
    """
    n_terms = check_positive_int(n_terms, "n_terms")
    ls = np.arange(start, start + n_terms, dtype=float)
    vals = np.asarray(term(ls), dtype=float)
    if vals.shape != ls.shape or np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValidationError("term must be finite and nonnegative")
    cum = np.cumsum(vals)
    ends = []
    i = 0  # first index of the open block
    base = 0.0
    while i < n_terms:
        j = int(np.searchsorted(cum, base + 1.0, side="right"))
        # recheck the block sum exactly and step on while it is not > 1
        while j < n_terms and math.fsum(vals[i:j + 1]) <= 1.0:
            j += 1
        if j >= n_terms:
            break
        ends.append(start + j)
        base = cum[j]
        i = j + 1
    if len(ends) < min_blocks:
        raise StaircaseIncomplete(len(ends), f"only {len(ends)} block(s) closed within {n_terms} terms")
    return Staircase(np.asarray(ends, dtype=np.int64), start)


@dataclass(frozen=True)
class PartialSumU:
    """``u(q) = sum_{t=0}^{floor(q)} 2^t psi1(2^t) psi2(2^t)``."""

    cumulative: np.ndarray
    diverges: bool

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.clip(np.floor(q).astype(np.int64), 0, len(self.cumulative) - 1)
        out = self.cumulative[idx]
        return out if out.ndim else float(out)


def build_u_partial_sums(psi1: ApproximatingFunction, psi2: ApproximatingFunction,
                         t_max: int = 200) -> PartialSumU:
    """Partial sums of the dyadic Lebesgue series; saturates beyond ``t_max``."""
    t = np.arange(t_max + 1)
    q = 2.0**t
    terms = q * psi1(q) * psi2(q)
    cum = np.cumsum(terms)
    return PartialSumU(cum, classify_lebesgue(psi1, psi2).verdict is Verdict.DIVERGES)


# ---------------------------------------------------------------------------
# coverage


def _check_lemma_hypotheses(psi, Qs):
    q = np.asarray(sorted(Qs), dtype=float)
    vals = psi(q)
    if len(q) > 1 and (np.any(np.diff(vals) > 0) or np.any(np.diff(q * vals) <= 0)):
        warnings.warn("psi(Q) -> 0 and Q psi(Q) -> infinity fail on the tested Q range", stacklevel=3)


def verify_local_ubiquity(curve: Curve, J, psi: ApproximatingFunction, theta=(0, 0),
                          Qs=(2**10,), C_grid=DEFAULT_C_GRID, mode: str = "half",
                          u: Callable = default_u, policy=StrictFloat(),
                          threads: int | None = None) -> list:
    """Coverage of J by balls around resonant points, for each Q and C.

    ``mode="half"`` uses ``Q/2 < q <= Q`` and radius ``C/(Q^2 psi(Q))``;
    ``mode="overu"`` uses ``Q/u(Q) < q <= Q`` and radius
    ``C u(Q)/(Q^2 psi(Q))``.  In both the resonant condition is a residual
    below ``psi(Q)/Q``.  The first C per Q reaching half coverage is flagged.
    """
    lo, hi = check_interval(J, "J")
    if mode not in ("half", "overu"):
        raise ValidationError(f"unknown coverage mode {mode!r}")
    Qs = [check_positive_int(Q, "Q") for Q in Qs]
    C_grid = sorted(float(c) for c in C_grid)
    if not C_grid or C_grid[0] <= 0:
        raise ValidationError("C grid must be nonempty and positive")
    _check_lemma_hypotheses(psi, Qs)
    length = hi - lo
    reports = []
    for Q in Qs:
        pQ = float(psi(Q))
        query = ShiftedQuery(curve, Q, window=(lo, hi), lower=mode, threshold=pQ / Q,
                             theta=theta, policy=policy, u=u)
        x = enumerate_arrays(query, threads)[3]
        scale = 1.0 / (Q * Q * pQ)
        if mode == "overu":
            scale *= float(u(Q))
        found = False
        for C in C_grid:
            r = C * scale
            covered = interval_union_measure(x - r, x + r, (lo, hi))
            fraction = min(1.0, covered / length)
            flag = not found and fraction >= 0.5
            found = found or flag
            reports.append(CoverageReport((lo, hi), Q, C, covered, fraction, int(x.size), flag))
    return reports


def minimal_C(reports) -> dict:
    """``{Q: minimal C}`` from flagged reports; Q without a flag maps to None."""
    out = {}
    for r in reports:
        out.setdefault(r.Q, None)
        if r.minimal:
            out[r.Q] = r.C
    return out
