"""Planar curve catalogue with exact derivatives and non-degenerate pieces."""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from numpy.polynomial import Polynomial as _NpPoly

from ._validation import ValidationError, as_fraction, check_interval, check_positive

__all__ = [
    "Curve",
    "PolynomialCurve",
    "Parabola",
    "Cubic",
    "CircleArc",
    "ExpCurve",
    "SinCurve",
    "NondegeneratePiece",
    "Decomposition",
    "DegenerateCurve",
    "decompose_nondegenerate",
    "select_xi",
    "parse_curve",
]

_ROOT_IMAG_TOL = 1e-9


class DegenerateCurve(ValidationError):
    """The second derivative vanishes on a whole subinterval."""


class Curve:
    """Graph of a C^3 function ``f`` on a closed interval ``[lo, hi]``.

    Subclasses provide vectorised ``f``, ``df``, ``d2f``, ``d3f``, an
    mpmath evaluator for high-precision checks, and the zeros of the first
    three derivatives on a given range.
    """

    name = "curve"
    interval: tuple

    def f(self, x):
        raise NotImplementedError

    def df(self, x):
        raise NotImplementedError

    def d2f(self, x):
        raise NotImplementedError

    def d3f(self, x):
        raise NotImplementedError

    def f_mp(self, x):
        raise NotImplementedError

    def zeros(self, order: int, lo: float, hi: float) -> list:
        """Zeros in ``[lo, hi]`` of the derivative of the given order (1..3).

        A derivative that vanishes identically reports no zeros; callers
        check for that case separately.
        """
        raise NotImplementedError

    def second_derivative_vanishes(self) -> bool:
        return False

    @property
    def length(self):
        lo, hi = self.interval
        return hi - lo

    def _extreme_abs(self, fn, order, lo, hi):
        pts = np.array([lo, hi, *self.zeros(order, lo, hi)], dtype=float)
        vals = np.abs(fn(pts))
        return float(vals.min()), float(vals.max())

    def sup_abs_df(self, lo=None, hi=None) -> float:
        """Exact ``sup |f'|`` on ``[lo, hi]`` (default: the whole interval)."""
        lo = self.interval[0] if lo is None else lo
        hi = self.interval[1] if hi is None else hi
        return self._extreme_abs(self.df, 2, lo, hi)[1]

    def d2f_bounds(self, lo, hi):
        """``(inf |f''|, sup |f''|)`` on ``[lo, hi]`` from endpoints and f''' zeros."""
        return self._extreme_abs(self.d2f, 3, lo, hi)

    def image_range(self, lo, hi):
        """Vectorised min and max of ``f`` over ``[lo, hi]`` (arrays allowed)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        flo, fhi = self.f(lo), self.f(hi)
        m, M = np.minimum(flo, fhi), np.maximum(flo, fhi)
        if lo.size:
            for z in self.zeros(1, float(lo.min()), float(hi.max())):
                inside = (lo < z) & (z < hi)
                if np.any(inside):
                    fz = float(self.f(np.float64(z)))
                    m = np.where(inside, np.minimum(m, fz), m)
                    M = np.where(inside, np.maximum(M, fz), M)
        return m, M

    def spec(self) -> str:
        lo, hi = self.interval
        return f"{self.name}(interval=[{lo!r},{hi!r}])"


@dataclass(frozen=True)
class PolynomialCurve(Curve):
    """``f(x) = sum coeffs[k] x^k`` (coefficients in ascending degree).

    Coefficients are kept as exact rationals so integer and rational shifts
    can be evaluated without rounding.
    """

    coeffs: tuple
    interval: tuple = (0.0, 1.0)
    name: str = field(default="poly", compare=False)

    def __post_init__(self):
        if not self.coeffs:
            raise ValidationError("polynomial needs at least one coefficient")
        exact = tuple(as_fraction(c) for c in self.coeffs)
        while len(exact) > 1 and exact[-1] == 0:
            exact = exact[:-1]
        object.__setattr__(self, "coeffs", exact)
        object.__setattr__(self, "interval", check_interval(self.interval))
        p = _NpPoly([float(c) for c in exact])
        object.__setattr__(self, "_p", [p, p.deriv(1), p.deriv(2), p.deriv(3)])

    def f(self, x):
        return self._p[0](x)

    def df(self, x):
        return self._p[1](x)

    def d2f(self, x):
        return self._p[2](x)

    def d3f(self, x):
        return self._p[3](x)

    def f_exact(self, x: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def f_mp(self, x):
        acc = mpmath.mpf(0)
        for c in reversed(self.coeffs):
            acc = acc * x + mpmath.mpf(c.numerator) / c.denominator
        return acc

    def second_derivative_vanishes(self):
        return len(self.coeffs) <= 2

    def zeros(self, order, lo, hi):
        d = self._p[order]
        if d.degree() < 1:
            return []
        roots = d.roots()
        real = roots[np.abs(np.imag(roots)) < _ROOT_IMAG_TOL].real
        return sorted(float(r) for r in real if lo <= r <= hi)

    def spec(self):
        lo, hi = self.interval
        if self.name in ("parabola", "cubic"):
            return f"{self.name}(interval=[{lo!r},{hi!r}])"
        cs = ",".join(repr(float(c)) for c in self.coeffs)
        return f"poly({cs},interval=[{lo!r},{hi!r}])"


def Parabola(interval=(0.0, 1.0)) -> PolynomialCurve:
    return PolynomialCurve((0, 0, 1), interval, name="parabola")


def Cubic(interval=(-1.0, 1.0)) -> PolynomialCurve:
    return PolynomialCurve((0, 0, 0, 1), interval, name="cubic")


@dataclass(frozen=True)
class CircleArc(Curve):
    """Upper unit semicircle ``sqrt(1 - x^2)`` on a subinterval of (-1, 1)."""

    interval: tuple = (-0.9, 0.9)
    name = "circle"

    def __post_init__(self):
        lo, hi = check_interval(self.interval)
        if lo <= -1 or hi >= 1:
            raise ValidationError("circle arc interval must lie inside (-1, 1)")
        object.__setattr__(self, "interval", (lo, hi))

    def f(self, x):
        return np.sqrt(1 - np.asarray(x) ** 2)

    def df(self, x):
        x = np.asarray(x)
        return -x / np.sqrt(1 - x**2)

    def d2f(self, x):
        x = np.asarray(x)
        return -((1 - x**2) ** -1.5)

    def d3f(self, x):
        x = np.asarray(x)
        return -3 * x * (1 - x**2) ** -2.5

    def f_mp(self, x):
        return mpmath.sqrt(1 - x**2)

    def zeros(self, order, lo, hi):
        return [0.0] if order in (1, 3) and lo <= 0 <= hi else []


@dataclass(frozen=True)
class ExpCurve(Curve):
    interval: tuple = (0.0, 1.0)
    name = "exp"

    def __post_init__(self):
        object.__setattr__(self, "interval", check_interval(self.interval))

    def f(self, x):
        return np.exp(x)

    df = d2f = d3f = f

    def f_mp(self, x):
        return mpmath.exp(x)

    def zeros(self, order, lo, hi):
        return []


@dataclass(frozen=True)
class SinCurve(Curve):
    interval: tuple = (0.0, math.pi)
    name = "sin"

    def __post_init__(self):
        object.__setattr__(self, "interval", check_interval(self.interval))

    def f(self, x):
        return np.sin(x)

    def df(self, x):
        return np.cos(x)

    def d2f(self, x):
        return -np.sin(x)

    def d3f(self, x):
        return -np.cos(x)

    def f_mp(self, x):
        return mpmath.sin(x)

    def zeros(self, order, lo, hi):
        offset = 0.0 if order == 2 else math.pi / 2
        k0 = math.ceil((lo - offset) / math.pi - 1e-12)
        out = []
        k = k0
        while offset + k * math.pi <= hi + 1e-12:
            z = offset + k * math.pi
            out.append(min(max(z, lo), hi))
            k += 1
        return out


# ---------------------------------------------------------------------------
# non-degenerate decomposition


@dataclass(frozen=True)
class NondegeneratePiece:
    """Subinterval with ``c1 <= |f''| <= c2`` and Hoelder data for ``f''``.

    ``lipschitz`` bounds ``|f''(x) - f''(y)| <= lipschitz * |x - y|^xi``,
    valid for any ``xi <= 1`` because the piece has length at most one.
    """

    lo: float
    hi: float
    c1: float
    c2: float
    xi: float
    lipschitz: float
    sup_abs_df: float

    @property
    def length(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class Decomposition:
    pieces: list
    excluded_measure: float
    f2_zeros: list
    margin: float


def decompose_nondegenerate(curve: Curve, margin: float | None = None,
                            eta: float = 0.9) -> Decomposition:
    """Split the curve's interval into pieces bounded away from ``f'' = 0``.

    Open neighbourhoods of radius ``margin`` (default ``0.05 |I|``) around
    each zero of ``f''`` are removed; what remains is cut into pieces of
    length at most one.
    """
    if curve.second_derivative_vanishes():
        raise DegenerateCurve(f"{curve.spec()} has f'' identically zero")
    lo, hi = curve.interval
    margin = 0.05 * (hi - lo) if margin is None else check_positive(margin, "margin")
    z2 = curve.zeros(2, lo, hi)
    xi = select_xi(eta)

    spans, start, excluded = [], lo, 0.0
    for z in z2:
        a, b = max(lo, z - margin), min(hi, z + margin)
        excluded += max(0.0, b - max(a, start))
        if a > start:
            spans.append((start, a))
        start = max(start, b)
    if start < hi:
        spans.append((start, hi))

    pieces = []
    for a, b in spans:
        n = max(1, math.ceil((b - a) - 1e-12))
        edges = np.linspace(a, b, n + 1)
        for x0, x1 in zip(edges[:-1], edges[1:]):
            x0, x1 = float(x0), float(x1)
            c1, c2 = curve.d2f_bounds(x0, x1)
            if c1 <= 0:
                raise DegenerateCurve(f"f'' vanishes inside [{x0}, {x1}]")
            grid = np.linspace(x0, x1, 1001)
            lip = 1.01 * float(np.max(np.abs(curve.d3f(grid))))
            pieces.append(NondegeneratePiece(x0, x1, c1, c2, xi, lip,
                                             curve.sup_abs_df(x0, x1)))
    return Decomposition(pieces, excluded, z2, margin)


def select_xi(eta: float) -> float:
    """Hoelder exponent strictly inside ``((3 eta - 1)/(1 + eta), 1)``.

    Midpoint of the admissible range; when its lower end is not positive the
    default 0.8 is returned.
    """
    if not eta < 1:
        raise ValidationError(f"eta must be < 1, got {eta}")
    if eta <= -1:
        raise ValidationError(f"eta must exceed -1, got {eta}")
    lower = (3 * eta - 1) / (1 + eta)
    if lower <= 0:
        return 0.8
    return (lower + 1) / 2


# ---------------------------------------------------------------------------
# parsing

_DEFAULT_INTERVALS = {
    "parabola": (0.0, 1.0),
    "cubic": (-1.0, 1.0),
    "poly": (0.0, 1.0),
    "circle": (-0.9, 0.9),
    "exp": (0.0, 1.0),
    "sin": (0.0, math.pi),
}


def _num(node):
    return float(ast.literal_eval(node)) if not isinstance(node, ast.Name) else {
        "pi": math.pi}[node.id]


def parse_curve(text: str, interval=None) -> Curve:
    """Parse ``parabola``, ``cubic``, ``poly(1,0,-2,0.5)``, ``circle``,
    ``exp`` or ``sin``, optionally with ``interval=[a,b]`` inside the call.

    An explicit ``interval`` argument overrides the inline one.
    """
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse curve {text!r}") from exc
    args, inline = [], None
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        args = node.args
        for kw in node.keywords:
            if kw.arg != "interval":
                raise ValidationError(f"unknown curve option {kw.arg!r}")
            inline = tuple(_num(e) for e in kw.value.elts)
    elif isinstance(node, ast.Name):
        name = node.id
    else:
        raise ValidationError(f"cannot parse curve {text!r}")
    if name not in _DEFAULT_INTERVALS:
        raise ValidationError(f"unknown curve family {name!r}")
    iv = interval if interval is not None else inline if inline is not None else _DEFAULT_INTERVALS[name]
    iv = check_interval(iv)
    if name == "parabola":
        return Parabola(iv)
    if name == "cubic":
        return Cubic(iv)
    if name == "poly":
        coeffs = []
        for a in args:
            val = ast.literal_eval(a)
            coeffs.append(Fraction(str(val)) if isinstance(val, float) else val)
        return PolynomialCurve(tuple(coeffs), iv)
    if name == "circle":
        return CircleArc(iv)
    if name == "exp":
        return ExpCurve(iv)
    return SinCurve(iv)
