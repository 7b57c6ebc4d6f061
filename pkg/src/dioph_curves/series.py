"""Convergence verdicts for the series criteria of weighted approximation.

Closed-form inputs (power and power-log families) are decided exactly from
the asymptotic exponents of the general term ``q^E (log q)^A``: the series
converges iff ``E < -1``, or ``E == -1`` and ``A < -1``.  Everything else
goes through dyadic condensation and may come back inconclusive.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from ._validation import ValidationError, as_fraction, as_theta
from .funcs import (
    ApproximatingFunction,
    DimensionFunction,
    DimPower,
    check_eta_lower_bound,
    check_t04_admissible,
)

__all__ = [
    "Verdict",
    "Method",
    "SeriesVerdict",
    "HeuristicConfig",
    "WeightedProblem",
    "DyadicBlocks",
    "CriticalExponent",
    "classify_weighted_hausdorff",
    "classify_curve_hausdorff",
    "classify_kj",
    "classify_lebesgue",
    "classify_multiplicative",
    "classify",
    "dimension_s0",
    "dyadic_condense",
    "weighted_term",
]

DEFAULT_LEVELS = 40


class Verdict(str, Enum):
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    INCONCLUSIVE = "Inconclusive"


class Method(str, Enum):
    CLOSED_FORM = "ClosedFormExponent"
    CONDENSATION = "DyadicCondensation"


@dataclass(frozen=True)
class HeuristicConfig:
    """Thresholds for condensation verdicts on non-closed-form input.

    Over the last ``window`` condensed blocks: every consecutive ratio below
    ``ratio`` means convergence; nondecreasing blocks that stay above
    ``floor`` mean divergence.  Anything else is inconclusive.
    """

    window: int = 8
    ratio: float = 0.9
    floor: float = 1e-6


@dataclass(frozen=True)
class SeriesVerdict:
    verdict: Verdict
    method: Method
    diagnostics: np.ndarray = field(repr=False)
    exponents: tuple | None = None
    reason: str = ""

    @property
    def converges(self) -> bool:
        return self.verdict is Verdict.CONVERGES

    def line(self) -> str:
        out = f"{self.verdict.value} ({self.method.value})"
        if self.exponents is not None:
            e, a = self.exponents
            out += f" E={float(e):.6g} A={float(a):.6g}"
        if self.reason:
            out += f" [{self.reason}]"
        return out


@dataclass(frozen=True)
class DyadicBlocks:
    """Per-level block sums over ``2^t <= q < 2^(t+1)``.

    ``raw`` is the exact block sum where ``exact`` is set, otherwise the
    endpoint-times-count estimate (equal to ``condensed``).
    """

    condensed: np.ndarray
    raw: np.ndarray
    exact: np.ndarray


class CriticalExponent(NamedTuple):
    s0: float
    corollary_applies: bool


def dyadic_condense(term: Callable, T: int = DEFAULT_LEVELS, exact_upto: int = 20) -> DyadicBlocks:
    """Condensed blocks ``2^t term(2^t)`` and raw block sums for ``t = 0..T``.

    For a monotone term each raw block lies between consecutive condensed
    values (up to the factor 2 between ``2^t`` and ``2^(t+1)``).
    """
    t = np.arange(T + 1)
    q = np.exp2(t)
    condensed = q * np.asarray(term(q), dtype=float)
    raw = condensed.copy()
    exact = np.zeros(T + 1, dtype=bool)
    for level in range(min(T, exact_upto) + 1):
        block = np.arange(2**level, 2 ** (level + 1), dtype=float)
        raw[level] = math.fsum(np.asarray(term(block), dtype=float))
        exact[level] = True
    return DyadicBlocks(condensed, raw, exact)


def _closed_form_verdict(E: Fraction, A: Fraction) -> Verdict:
    if E < -1 or (E == -1 and A < -1):
        return Verdict.CONVERGES
    return Verdict.DIVERGES


def _heuristic(blocks: np.ndarray, cfg: HeuristicConfig):
    tail = blocks[-cfg.window:]
    if tail.size < 2 or not np.all(np.isfinite(tail)):
        return Verdict.INCONCLUSIVE, "too few finite blocks"
    diffs = np.diff(tail)
    if np.all(diffs <= 0):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = tail[1:] / tail[:-1]
        if np.all(ratios < cfg.ratio):
            return Verdict.CONVERGES, f"geometric tail, max block ratio {ratios.max():.3g}"
        return Verdict.INCONCLUSIVE, f"blocks decay slower than ratio {cfg.ratio}"
    if np.all(diffs >= 0) and tail.min() >= cfg.floor:
        return Verdict.DIVERGES, f"blocks nondecreasing and >= {cfg.floor:g}"
    return Verdict.INCONCLUSIVE, "blocks not monotone over the tail window"


def _decide(term, functions, exponents, T, cfg, diagnostics=True):
    if exponents is not None:
        E, A = exponents
        diag = np.cumsum(dyadic_condense(term, T, exact_upto=-1).condensed) if diagnostics else np.empty(0)
        return SeriesVerdict(_closed_form_verdict(E, A), Method.CLOSED_FORM, diag, (E, A))
    horizon = min(getattr(f, "horizon", math.inf) for f in functions)
    if 2.0**T > horizon:
        blocks = dyadic_condense(term, T, exact_upto=-1).condensed
        return SeriesVerdict(Verdict.INCONCLUSIVE, Method.CONDENSATION, np.cumsum(blocks),
                             reason=f"tabulated range q <= {horizon} shorter than checkpoint 2^{T}")
    blocks = dyadic_condense(term, T, exact_upto=-1).condensed
    verdict, reason = _heuristic(blocks, cfg)
    return SeriesVerdict(verdict, Method.CONDENSATION, np.cumsum(blocks), reason=reason)


def _safe_log(q):
    return np.log(np.asarray(q, dtype=float))


# ---------------------------------------------------------------------------
# criteria


def weighted_term(psi1, psi2, h):
    """General term ``q h(min(psi1, psi2)(q) / q) max(psi1, psi2)(q)``."""

    def term(q):
        a, b = psi1(q), psi2(q)
        return q * h(np.minimum(a, b) / q) * np.maximum(a, b)

    return term


def classify_weighted_hausdorff(psi1: ApproximatingFunction, psi2: ApproximatingFunction,
                                h: DimensionFunction, T: int = DEFAULT_LEVELS,
                                config: HeuristicConfig = HeuristicConfig(),
                                diagnostics: bool = True) -> SeriesVerdict:
    """Verdict for ``sum q h(min(psi1, psi2)/q) max(psi1, psi2)``."""
    report = check_t04_admissible(h)
    if not report.admissible:
        warnings.warn(f"dimension function not admissible: {report.reason}", stacklevel=2)
    sig1, sig2, hsig = psi1.asymptotic(), psi2.asymptotic(), h.asymptotic()
    exps = None
    if sig1 is not None and sig2 is not None and hsig is not None:
        v_small, a_small = max(sig1, sig2)  # signature of min(psi1, psi2)
        v_big, a_big = min(sig1, sig2)
        s, b = hsig
        exps = (1 - s * (1 + v_small) - v_big, -s * a_small - b - a_big)
    return _decide(weighted_term(psi1, psi2, h), (psi1, psi2), exps, T, config, diagnostics)


def classify_curve_hausdorff(psi: ApproximatingFunction, s: float, T: int = DEFAULT_LEVELS,
                             config: HeuristicConfig = HeuristicConfig(),
                             diagnostics: bool = True) -> SeriesVerdict:
    """Verdict for ``sum q^(1-s) psi(q)^(s+1)``; ``s`` must lie in (0, 1]."""
    if not 0 < s <= 1:
        raise ValidationError(f"s must lie in (0, 1], got {s}")
    if s <= 0.5:
        warnings.warn("the curve criterion is stated for 1/2 < s <= 1", stacklevel=2)
    sig = psi.asymptotic()
    exps = None
    if sig is not None:
        v, a = sig
        S = as_fraction(s)
        exps = (1 - S - (S + 1) * v, -(S + 1) * a)

    def term(q):
        return q ** (1 - s) * psi(q) ** (s + 1)

    return _decide(term, (psi,), exps, T, config, diagnostics)


def classify_kj(psi: ApproximatingFunction, s: float, T: int = DEFAULT_LEVELS,
                config: HeuristicConfig = HeuristicConfig(),
                diagnostics: bool = True) -> SeriesVerdict:
    """Verdict for ``sum q^(2-s) psi(q)^s``; ``s`` must lie in (0, 2]."""
    if not 0 < s <= 2:
        raise ValidationError(f"s must lie in (0, 2], got {s}")
    sig = psi.asymptotic()
    exps = None
    if sig is not None:
        v, a = sig
        S = as_fraction(s)
        exps = (2 - S - S * v, -S * a)

    def term(q):
        return q ** (2 - s) * psi(q) ** s

    return _decide(term, (psi,), exps, T, config, diagnostics)


def classify_lebesgue(psi1: ApproximatingFunction, psi2: ApproximatingFunction,
                      T: int = DEFAULT_LEVELS, config: HeuristicConfig = HeuristicConfig(),
                      diagnostics: bool = True) -> SeriesVerdict:
    """Verdict for ``sum psi1(q) psi2(q)``."""
    sig1, sig2 = psi1.asymptotic(), psi2.asymptotic()
    exps = None
    if sig1 is not None and sig2 is not None:
        exps = (-sig1[0] - sig2[0], -sig1[1] - sig2[1])

    def term(q):
        return psi1(q) * psi2(q)

    return _decide(term, (psi1, psi2), exps, T, config, diagnostics)


def classify_multiplicative(psi: ApproximatingFunction, s: float = 1.0, T: int = DEFAULT_LEVELS,
                            config: HeuristicConfig = HeuristicConfig(),
                            diagnostics: bool = True) -> SeriesVerdict:
    """Verdict for the multiplicative criteria.

    ``s == 1`` is the Gallagher form ``sum log(q) psi(q)``; for ``s < 1`` the
    series is ``sum q^(1-s) psi(q)^s log(q)^s`` (stated for 2/3 < s <= 1).
    """
    if not 0 < s <= 1:
        raise ValidationError(f"s must lie in (0, 1], got {s}")
    if s <= Fraction(2, 3):
        warnings.warn("the multiplicative criterion is stated for 2/3 < s <= 1", stacklevel=2)
    sig = psi.asymptotic()
    exps = None
    if sig is not None:
        v, a = sig
        S = as_fraction(s)
        exps = (1 - S - S * v, S - S * a)

    def term(q):
        return q ** (1 - s) * psi(q) ** s * _safe_log(q) ** s

    return _decide(term, (psi,), exps, T, config, diagnostics)


def dimension_s0(v1: float, v2: float) -> CriticalExponent:
    """``(2 - min(v1, v2)) / (1 + max(v1, v2))`` and whether it is below 1."""
    lo, hi = min(v1, v2), max(v1, v2)
    if not 0 < lo < 1:
        raise ValidationError(f"min(v1, v2) must lie in (0, 1), got {lo}")
    s0 = (2 - lo) / (1 + hi)
    return CriticalExponent(s0, s0 < 1)


@dataclass(frozen=True)
class WeightedProblem:
    """Two approximating functions, a dimension function, a shift and eta.

    ``eta_check`` is ``"warn"`` (default), ``"enforce"`` or ``"off"``; it
    governs the ``max(psi1, psi2) >= q^-eta`` test on ``q <= eta_range``.
    """

    psi1: ApproximatingFunction
    psi2: ApproximatingFunction
    h: DimensionFunction = field(default_factory=lambda: DimPower(1.0))
    theta: tuple = (0, 0)
    eta: float = 0.9
    eta_check: str = "warn"
    eta_range: int = 10**4

    def __post_init__(self):
        if not self.eta < 1:
            raise ValidationError(f"eta must be < 1, got {self.eta}")
        object.__setattr__(self, "theta", as_theta(self.theta))
        if self.eta_check not in ("warn", "enforce", "off"):
            raise ValidationError(f"unknown eta_check mode {self.eta_check!r}")
        if self.eta_check != "off":
            check_eta_lower_bound(self.psi1, self.psi2, self.eta, self.eta_range,
                                  enforce=self.eta_check == "enforce")

    def classify(self, **kwargs) -> SeriesVerdict:
        return classify_weighted_hausdorff(self.psi1, self.psi2, self.h, **kwargs)


CRITERIA = ("t04", "t02", "kj", "curve", "mult", "gallagher")


def classify(criterion: str, psi1, psi2=None, h=None, s=None, **kwargs) -> SeriesVerdict:
    """Dispatch by criterion name (the names used on the command line)."""
    if criterion == "t04":
        if psi2 is None or h is None:
            raise ValidationError("t04 needs psi1, psi2 and h")
        return classify_weighted_hausdorff(psi1, psi2, h, **kwargs)
    if criterion == "t02":
        if psi2 is None:
            raise ValidationError("t02 needs psi1 and psi2")
        return classify_lebesgue(psi1, psi2, **kwargs)
    if criterion in ("kj", "curve", "mult"):
        if s is None:
            raise ValidationError(f"{criterion} needs s")
        fn = {"kj": classify_kj, "curve": classify_curve_hausdorff,
              "mult": classify_multiplicative}[criterion]
        return fn(psi1, s, **kwargs)
    if criterion == "gallagher":
        return classify_multiplicative(psi1, 1.0, **kwargs)
    raise ValidationError(f"unknown criterion {criterion!r}; choose from {', '.join(CRITERIA)}")
