"""Covers of the approximable set, Hausdorff tail bounds and membership tests.

For a level t the cover consists of the intervals

    sigma = {x in piece : |x - (p1 + theta1)/q| < psi1(q)/q,
                          |f(x) - (p2 + theta2)/q| < psi2(q)/q}

with ``2^t <= q < 2^(t+1)`` that are nonempty.  Two nonemptiness tests are
offered: ``"sufficient"`` keeps every candidate whose centre residual is
below ``c3 max(psi1, psi2)(q)/q`` with ``c3 = 1 + sup|f'|`` (a mean-value
bound, hence a superset), ``"exact"`` keeps those whose window image really
meets the target interval.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import (
    CONSTRUCTION_TOL,
    ValidationError,
    as_theta,
    check_positive_int,
)
from .curves import Curve, NondegeneratePiece, decompose_nondegenerate
from .funcs import (
    ApproximatingFunction,
    DimensionFunction,
    check_t04_admissible,
    reduce_min_max,
)
from .resonant import ResonantPoint, q_chunks, run_chunks

__all__ = [
    "CoverInterval",
    "CoverLevel",
    "MembershipWitness",
    "HausdorffEstimate",
    "SlopeEstimate",
    "MonteCarloEstimate",
    "build_cover_level",
    "cover_level_arrays",
    "level_counts",
    "hausdorff_upper_estimate",
    "slope_dimension_estimate",
    "membership_test",
    "lebesgue_fraction",
    "first_moment_bound",
    "multiplicative_membership",
    "multiplicative_fraction",
]

MODES = ("exact", "sufficient")


@dataclass(frozen=True)
class CoverInterval:
    """One nonempty sigma-interval.

    ``flagged`` marks windows containing a critical point of f, where the
    image extreme comes from that point rather than the window ends.
    """

    center: float
    half_width: float
    t: int
    q: int
    p1: int
    p2: int
    residual: float
    flagged: bool = False

    @property
    def diameter(self) -> float:
        return 2.0 * self.half_width

    @property
    def source(self) -> ResonantPoint:
        return ResonantPoint(self.q, self.p1, self.p2, self.center, self.residual)


@dataclass(frozen=True)
class CoverLevel:
    """Column arrays of a level's cover, sorted by ``(q, p1, p2)``."""

    t: int
    q: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    center: np.ndarray
    half_width: np.ndarray
    residual: np.ndarray
    flagged: np.ndarray
    c3: float

    @property
    def count(self) -> int:
        return int(self.q.size)

    def intervals(self) -> list:
        return [CoverInterval(float(c), float(w), self.t, int(q), int(a), int(b), float(r), bool(f))
                for q, a, b, c, w, r, f in zip(self.q, self.p1, self.p2, self.center,
                                               self.half_width, self.residual, self.flagged)]

    def center_triples(self, piece: NondegeneratePiece, psi2: ApproximatingFunction,
                       tau: float = CONSTRUCTION_TOL) -> set:
        """``(p1, p2, q)`` whose centre lies in the piece with residual below ``psi2(q)/q``."""
        qf = self.q.astype(float)
        keep = ((self.center >= piece.lo) & (self.center <= piece.hi)
                & (self.residual < psi2(qf) / qf - tau))
        return set(zip(self.p1[keep].tolist(), self.p2[keep].tolist(), self.q[keep].tolist()))


def _level_chunk(curve, piece, psi1, psi2, frac, c3, mode, tau, chunk):
    lo, hi = piece.lo, piece.hi
    f1, f2 = float(frac[0]), float(frac[1])
    qs = np.arange(chunk[0], chunk[1], dtype=np.int64)
    qf = qs.astype(float)
    s1, s2 = psi1(qf), psi2(qf)
    # centres with c > lo - psi1/q and c < hi + psi1/q, padded by one
    p_lo = np.floor(qf * lo - s1 - f1).astype(np.int64)
    p_hi = np.ceil(qf * hi + s1 - f1).astype(np.int64)
    n = np.maximum(p_hi - p_lo + 1, 0)
    idx = np.repeat(np.arange(qs.size), n)
    p1 = np.repeat(p_lo - np.concatenate([[0], np.cumsum(n)[:-1]]), n) + np.arange(idx.size)
    q = qf[idx]
    r1 = s1[idx] / q
    c = (p1 + f1) / q
    w_lo, w_hi = np.maximum(c - r1, lo), np.minimum(c + r1, hi)
    ok = w_lo < w_hi
    idx, p1, q, r1, c, w_lo, w_hi = idx[ok], p1[ok], q[ok], r1[ok], c[ok], w_lo[ok], w_hi[ok]
    cc = np.clip(c, lo, hi)
    y = q * curve.f(cc) - f2
    R = c3 * np.maximum(s1, s2)[idx] - tau
    k_lo = np.floor(y - R).astype(np.int64) + 1
    k_hi = np.ceil(y + R).astype(np.int64) - 1
    m = np.maximum(k_hi - k_lo + 1, 0)
    rep = np.repeat(np.arange(idx.size), m)
    p2 = np.repeat(k_lo - np.concatenate([[0], np.cumsum(m)[:-1]]), m) + np.arange(rep.size)
    idx, p1, q, r1, c, w_lo, w_hi, y = (a[rep] for a in (idx, p1, q, r1, c, w_lo, w_hi, y))
    flagged = np.zeros(idx.size, dtype=bool)
    if mode == "exact" and idx.size:
        fm, fM = curve.image_range(w_lo, w_hi)
        t2 = s2[idx]
        keep = (q * fm - f2 < p2 + t2 - tau) & (q * fM - f2 > p2 - t2 + tau)
        for z in curve.zeros(1, lo, hi):
            flagged |= (w_lo < z) & (z < w_hi)
        idx, p1, p2, q, r1, c, y, flagged = (a[keep] for a in (idx, p1, p2, q, r1, c, y, flagged))
    residual = np.abs(y - p2) / q
    return (qs[idx], p1, p2, c, r1, residual, flagged)


def cover_level_arrays(curve: Curve, t: int, psi1: ApproximatingFunction,
                       psi2: ApproximatingFunction, theta=(0, 0),
                       piece: NondegeneratePiece | None = None, mode: str = "exact",
                       tau: float = CONSTRUCTION_TOL, threads: int | None = None) -> CoverLevel:
    """Cover of level t on one piece as column arrays."""
    if mode not in MODES:
        raise ValidationError(f"unknown cover mode {mode!r}")
    t = int(t)
    if t < 0:
        raise ValidationError("level t must be >= 0")
    if piece is None:
        pieces = decompose_nondegenerate(curve).pieces
        if len(pieces) != 1:
            raise ValidationError("curve splits into several pieces; pass one explicitly")
        piece = pieces[0]
    th = as_theta(theta)
    m1, m2 = math.floor(th[0]), math.floor(th[1])
    frac = (th[0] - m1, th[1] - m2)
    c3 = 1.0 + piece.sup_abs_df
    chunks = q_chunks(2**t, 2 ** (t + 1), piece.length + 1.0)
    parts = run_chunks(lambda ch: _level_chunk(curve, piece, psi1, psi2, frac, c3, mode, tau, ch),
                       chunks, threads)
    q, p1, p2, c, r1, res, fl = (np.concatenate(col) for col in zip(*parts))
    return CoverLevel(t, q, p1 - m1, p2 - m2, c, r1, res, fl, c3)


def build_cover_level(curve: Curve, t: int, psi1, psi2, theta=(0, 0), piece=None,
                      mode: str = "exact", threads: int | None = None) -> list:
    """The level-t cover as a list of :class:`CoverInterval`.

    Callers apply the min/max reduction first so that ``psi1 <= psi2``.
    """
    return cover_level_arrays(curve, t, psi1, psi2, theta, piece, mode, threads=threads).intervals()


def level_counts(curve: Curve, levels, psi1, psi2, theta=(0, 0), mode: str = "exact",
                 pieces=None, threads: int | None = None) -> dict:
    """``{t: number of nonempty sigma-intervals}`` summed over pieces."""
    pieces = decompose_nondegenerate(curve).pieces if pieces is None else pieces
    return {int(t): sum(cover_level_arrays(curve, t, psi1, psi2, theta, pc, mode,
                                           threads=threads).count for pc in pieces)
            for t in levels}


# ---------------------------------------------------------------------------
# Hausdorff tails


@dataclass(frozen=True)
class HausdorffEstimate:
    """Per-level counts and contributions for both orderings, and tail sums.

    ``tails[l] = sum_{t=l}^{L} contribution[t]``.
    """

    levels: tuple
    counts_min_max: dict
    counts_max_min: dict
    contributions: dict
    tails: dict

    def rows(self):
        for t in self.levels:
            yield {"t": t, "count_min_max": self.counts_min_max[t],
                   "count_max_min": self.counts_max_min[t], "h_contrib": self.contributions[t]}


def hausdorff_upper_estimate(curve: Curve, psi1, psi2, h: DimensionFunction, theta=(0, 0),
                             ls=range(6, 13), L: int = 13, mode: str = "exact",
                             threads: int | None = None) -> HausdorffEstimate:
    """Finite-level cover bounds on the h-measure of the approximable set.

    Both orderings ``(min, max)`` and ``(max, min)`` of the pair are covered;
    every interval at level t contributes ``h(2 psi_first(2^t)/2^t)``.
    """
    report = check_t04_admissible(h)
    if not report.admissible:
        raise ValidationError(f"dimension function not admissible: {report.reason}")
    ls = sorted(int(l) for l in ls)
    if not ls or ls[-1] > L:
        raise ValidationError("need l <= L")
    small, big = reduce_min_max(psi1, psi2)
    pieces = decompose_nondegenerate(curve).pieces
    levels = tuple(range(ls[0], L + 1))
    a = level_counts(curve, levels, small, big, theta, mode, pieces, threads)
    b = level_counts(curve, levels, big, small, theta, mode, pieces, threads)
    contrib = {}
    for t in levels:
        q = 2.0**t
        contrib[t] = a[t] * float(h(2 * small(q) / q)) + b[t] * float(h(2 * big(q) / q))
    tails = {l: math.fsum(contrib[t] for t in range(l, L + 1)) for l in ls}
    return HausdorffEstimate(levels, a, b, contrib, tails)


# ---------------------------------------------------------------------------
# slope fit


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    stderr: float
    intercept: float
    residual: float
    levels_used: tuple
    excluded_zero: tuple

    def band(self, k: float = 2.0) -> tuple:
        return (self.slope - k * self.stderr, self.slope + k * self.stderr)


def slope_dimension_estimate(counts, v_max: float, burn_in: int = 2,
                             min_levels: int = 5) -> SlopeEstimate:
    """Least-squares slope of ``log2 count(t)`` against ``t (1 + v_max)``.

    ``counts`` maps level to count.  The ``burn_in`` lowest levels are
    dropped, then zero-count levels are dropped and reported.
    """
    items = sorted((int(t), float(c)) for t, c in dict(counts).items())
    items = items[burn_in:]
    zero = tuple(t for t, c in items if c <= 0)
    if zero:
        warnings.warn(f"levels with zero count excluded: {zero}", stacklevel=2)
    items = [(t, c) for t, c in items if c > 0]
    if len(items) < min_levels:
        raise ValidationError(f"need at least {min_levels} nonzero levels, got {len(items)}")
    x = np.array([t for t, _ in items], dtype=float) * (1.0 + v_max)
    y = np.log2(np.array([c for _, c in items], dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    rss = float(np.sum((y - fit) ** 2))
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(rss / dof / sxx) if dof > 0 else float("nan")
    return SlopeEstimate(float(coef[0]), stderr, float(coef[1]), math.sqrt(rss / len(x)),
                         tuple(t for t, _ in items), zero)


# ---------------------------------------------------------------------------
# membership


@dataclass(frozen=True)
class MembershipWitness:
    x: float
    q: int
    p1: int
    p2: int
    residuals: tuple


def _dist(v):
    return np.abs(v - np.rint(v))


def membership_test(x: float, curve: Curve, psi1, psi2, theta=(0, 0), Q_max: int = 2**13,
                    q_min: int = 1, tau: float = CONSTRUCTION_TOL):
    """Smallest ``q`` in ``[q_min, Q_max]`` with ``||q x - theta1|| < psi1(q)``
    and ``||q f(x) - theta2|| < psi2(q)``, or None."""
    lo, hi = curve.interval
    if not lo <= x <= hi:
        raise ValidationError(f"x = {x} outside {curve.interval}")
    Q_max = check_positive_int(Q_max, "Q_max")
    q_min = check_positive_int(q_min, "q_min")
    t1, t2 = (float(v) for v in as_theta(theta))
    fx = float(curve.f(np.float64(x)))
    qs = np.arange(q_min, Q_max + 1, dtype=float)
    a, b = qs * x - t1, qs * fx - t2
    d1, d2 = _dist(a), _dist(b)
    hit = np.nonzero((d1 < psi1(qs) - tau) & (d2 < psi2(qs) - tau))[0]
    if hit.size == 0:
        return None
    i = int(hit[0])
    return MembershipWitness(x, int(qs[i]), int(np.rint(a[i])), int(np.rint(b[i])),
                             (float(d1[i]), float(d2[i])))


def _first_hits(x, y, cond, window, q_block=512):
    """Boolean array: does some q in ``window`` satisfy ``cond(qs, x, y)``."""
    q_lo, q_hi = window
    hit = np.zeros(x.size, dtype=bool)
    for a in range(q_lo, q_hi + 1, q_block):
        todo = np.nonzero(~hit)[0]
        if todo.size == 0:
            break
        qs = np.arange(a, min(a + q_block, q_hi + 1), dtype=float)
        ok = cond(qs[None, :], x[todo, None], y[todo, None])
        hit[todo] = ok.any(axis=1)
    return hit


@dataclass(frozen=True)
class MonteCarloEstimate:
    fraction: float
    samples: np.ndarray
    hits: np.ndarray
    window: tuple
    seed: int

    def row(self) -> dict:
        return {"samples": int(self.samples.size), "window_lo": self.window[0],
                "window_hi": self.window[1], "fraction": self.fraction, "seed": self.seed}


def _sample(curve, n, seed, batch):
    lo, hi = curve.interval
    seqs = np.random.SeedSequence(seed).spawn(math.ceil(n / batch))
    out = [np.random.default_rng(s).uniform(lo, hi, size=min(batch, n - i * batch))
           for i, s in enumerate(seqs)]
    return out


def _window(window):
    q_lo, q_hi = (int(v) for v in window)
    if q_lo < 1 or q_hi < q_lo:
        raise ValidationError(f"bad q window {window}")
    return q_lo, q_hi


def lebesgue_fraction(curve: Curve, psi1, psi2, theta=(0, 0), window=(1, 2**13),
                      samples: int = 10**4, seed: int = 0, batch: int = 1000,
                      threads: int | None = None, tau: float = CONSTRUCTION_TOL) -> MonteCarloEstimate:
    """Share of uniform x in the interval with a witness q in ``window``.

    Batches draw from independent children of ``SeedSequence(seed)``, so the
    result depends on the seed and batch size only.
    """
    window = _window(window)
    samples = check_positive_int(samples, "samples")
    t1, t2 = (float(v) for v in as_theta(theta))

    def cond(qs, x, y):
        return (_dist(qs * x - t1) < psi1(qs) - tau) & (_dist(qs * y - t2) < psi2(qs) - tau)

    batches = _sample(curve, samples, seed, batch)
    hits = run_chunks(lambda xs: _first_hits(xs, curve.f(xs), cond, window), batches, threads)
    x, hit = np.concatenate(batches), np.concatenate(hits)
    return MonteCarloEstimate(float(hit.mean()), x, hit, window, seed)


def first_moment_bound(psi1, psi2, window, factor: float = 4.0) -> float:
    """``sum_{q in window} factor psi1(q) psi2(q)``."""
    q_lo, q_hi = _window(window)
    qs = np.arange(q_lo, q_hi + 1, dtype=float)
    return factor * math.fsum((psi1(qs) * psi2(qs)).tolist())


def multiplicative_membership(x1: float, x2: float, psi, theta=(0, 0), Q_max: int = 2**13,
                              q_min: int = 1, tau: float = CONSTRUCTION_TOL):
    """Smallest q with ``||q x1 - theta1|| ||q x2 - theta2|| < psi(q)``, or None."""
    t1, t2 = (float(v) for v in as_theta(theta))
    qs = np.arange(check_positive_int(q_min, "q_min"), check_positive_int(Q_max, "Q_max") + 1,
                   dtype=float)
    prod = _dist(qs * x1 - t1) * _dist(qs * x2 - t2)
    hit = np.nonzero(prod < psi(qs) - tau)[0]
    return int(qs[hit[0]]) if hit.size else None


def multiplicative_fraction(curve: Curve, psi, theta=(0, 0), window=(1, 2**13),
                            samples: int = 10**4, seed: int = 0, batch: int = 1000,
                            threads: int | None = None,
                            tau: float = CONSTRUCTION_TOL) -> MonteCarloEstimate:
    """Share of uniform x with a multiplicative witness ``(x, f(x))`` in ``window``."""
    window = _window(window)
    samples = check_positive_int(samples, "samples")
    t1, t2 = (float(v) for v in as_theta(theta))

    def cond(qs, x, y):
        return _dist(qs * x - t1) * _dist(qs * y - t2) < psi(qs) - tau

    batches = _sample(curve, samples, seed, batch)
    hits = run_chunks(lambda xs: _first_hits(xs, curve.f(xs), cond, window), batches, threads)
    x, hit = np.concatenate(batches), np.concatenate(hits)
    return MonteCarloEstimate(float(hit.mean()), x, hit, window, seed)
