"""Approximating functions, dimension functions and the checks run on them.

Approximating functions are monotone ``psi: N -> R+`` evaluated on integer
arrays; dimension functions are increasing ``h: R+ -> R+`` with ``h(0+) = 0``.
Closed-form families expose their asymptotic exponents so that series
criteria can be decided by exponent algebra instead of summation.
"""

from __future__ import annotations

import ast
import csv
import math
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._validation import (
    CONSTRUCTION_TOL,
    ValidationError,
    as_fraction,
    check_positive,
)

__all__ = [
    "ApproximatingFunction",
    "Power",
    "PowerLog",
    "Table",
    "Scaled",
    "FlooredMax",
    "MinOf",
    "MaxOf",
    "SlowedDown",
    "DimensionFunction",
    "DimPower",
    "DimPowerLog",
    "DimIdentity",
    "DimTable",
    "AdmissibilityReport",
    "RegularityReport",
    "evaluate",
    "check_t04_admissible",
    "check_regular",
    "check_eta_lower_bound",
    "reduce_min_max",
    "floor_modify",
    "slowdown_by_partial_sums",
    "parse_function",
    "parse_dimension",
]

_E_MINUS_1 = math.e - 1.0


def _ell(x):
    # log(x + e - 1): positive, increasing, equal to 1 at x = 1, ~ log x at infinity
    return np.log(np.asarray(x, dtype=float) + _E_MINUS_1)


def _as_q(q):
    arr = np.asarray(q, dtype=float)
    if arr.size and (np.any(arr < 1) or not np.all(np.isfinite(arr))):
        raise ValidationError("approximating functions are evaluated at q >= 1")
    return arr


def _larger(a, b):
    """Asymptotically larger of two (v, a) decay signatures, or None."""
    if a is None or b is None:
        return None
    return min(a, b)


def _smaller(a, b):
    if a is None or b is None:
        return None
    return max(a, b)


# ---------------------------------------------------------------------------
# approximating functions


class ApproximatingFunction:
    """Base class for monotone nonincreasing ``psi: N -> R+``.

    Subclasses implement ``_eval`` on float arrays of denominators.  Calling
    the object accepts an int or an array and returns a float or an array.
    """

    #: largest q at which values are data rather than extrapolation
    horizon: float = math.inf

    def __call__(self, q):
        arr = _as_q(q)
        out = self._eval(arr)
        if np.ndim(q) == 0:
            return float(out)
        return out

    def _eval(self, q: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def asymptotic(self):
        """Decay signature ``(v, a)`` with ``psi(q) ~ q^-v (log q)^-a``.

        Returns ``None`` for families with no closed form.  Both entries are
        exact :class:`~fractions.Fraction` values.
        """
        return None

    def expr(self) -> str:
        return repr(self)


@dataclass(frozen=True)
class Power(ApproximatingFunction):
    """``c * q**(-v)``."""

    v: float
    c: float = 1.0

    def __post_init__(self):
        check_positive(self.v, "v")
        check_positive(self.c, "c")

    def _eval(self, q):
        return self.c * q ** (-self.v)

    def asymptotic(self):
        return (as_fraction(self.v), Fraction(0))

    def expr(self):
        return f"pow(v={self.v!r},c={self.c!r})" if self.c != 1 else f"pow(v={self.v!r})"


@dataclass(frozen=True)
class PowerLog(ApproximatingFunction):
    """``c * q**(-v) * L(q)**(-a)`` with ``L(q) = log(q + e - 1)``.

    ``L`` is a shifted logarithm so the function is positive at ``q = 1``;
    asymptotically it is ``log q``.  Negative ``a`` (a growing log factor)
    is accepted when ``a >= -v``, which keeps the product nonincreasing.
    """

    v: float
    a: float
    c: float = 1.0

    def __post_init__(self):
        check_positive(self.v, "v")
        check_positive(self.c, "c")
        if not math.isfinite(self.a):
            raise ValidationError("a must be finite")
        if self.a < -self.v:
            raise ValidationError("powlog needs a >= -v to stay nonincreasing")

    def _eval(self, q):
        return self.c * q ** (-self.v) * _ell(q) ** (-self.a)

    def asymptotic(self):
        return (as_fraction(self.v), as_fraction(self.a))

    def expr(self):
        return f"powlog(v={self.v!r},a={self.a!r},c={self.c!r})"


@dataclass(frozen=True, eq=False)
class Table(ApproximatingFunction):
    """Tabulated values at ``q = 1..len(values)``, constant beyond the end."""

    values: tuple
    source: str | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValidationError("table needs at least one value")
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise ValidationError("table values must be positive and finite")
        if np.any(np.diff(vals) > CONSTRUCTION_TOL):
            raise ValidationError("table values must be nonincreasing in q")
        object.__setattr__(self, "values", tuple(vals.tolist()))
        object.__setattr__(self, "_arr", vals)

    @property
    def horizon(self):
        return len(self.values)

    def _eval(self, q):
        idx = np.minimum(np.floor(q).astype(np.int64), len(self.values)) - 1
        return self._arr[idx]

    def __eq__(self, other):
        return isinstance(other, Table) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    @classmethod
    def from_csv(cls, path):
        """Read a two-column ``q,value`` file; gaps in q are step-filled."""
        qs, vals = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    q, val = int(row[0]), float(row[1])
                except ValueError:
                    if not qs:  # header line
                        continue
                    raise ValidationError(f"bad table row {row!r} in {path}")
                qs.append(q)
                vals.append(val)
        if not qs or qs[0] != 1:
            raise ValidationError("table must start at q = 1")
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValidationError("table q column must be strictly increasing")
        filled = np.repeat(vals, np.diff(qs + [qs[-1] + 1]))
        return cls(tuple(filled), source=str(path))

    def expr(self):
        return f"table({self.source})" if self.source else f"table(<{len(self.values)} values>)"


@dataclass(frozen=True)
class Scaled(ApproximatingFunction):
    base: ApproximatingFunction
    factor: float

    def __post_init__(self):
        check_positive(self.factor, "factor")

    @property
    def horizon(self):
        return self.base.horizon

    def _eval(self, q):
        return self.factor * self.base._eval(q)

    def asymptotic(self):
        return self.base.asymptotic()

    def expr(self):
        return f"scale({self.base.expr()},k={self.factor!r})"


@dataclass(frozen=True)
class FlooredMax(ApproximatingFunction):
    """``max(base(q), q**(-e))``."""

    base: ApproximatingFunction
    e: float

    def __post_init__(self):
        check_positive(self.e, "e")

    @property
    def horizon(self):
        return self.base.horizon

    def _eval(self, q):
        return np.maximum(self.base._eval(q), q ** (-self.e))

    def asymptotic(self):
        return _larger(self.base.asymptotic(), (as_fraction(self.e), Fraction(0)))

    def expr(self):
        return f"floor({self.base.expr()},e={self.e!r})"


@dataclass(frozen=True)
class MinOf(ApproximatingFunction):
    f: ApproximatingFunction
    g: ApproximatingFunction

    @property
    def horizon(self):
        return min(self.f.horizon, self.g.horizon)

    def _eval(self, q):
        return np.minimum(self.f._eval(q), self.g._eval(q))

    def asymptotic(self):
        return _smaller(self.f.asymptotic(), self.g.asymptotic())

    def expr(self):
        return f"min({self.f.expr()},{self.g.expr()})"


@dataclass(frozen=True)
class MaxOf(ApproximatingFunction):
    f: ApproximatingFunction
    g: ApproximatingFunction

    @property
    def horizon(self):
        return min(self.f.horizon, self.g.horizon)

    def _eval(self, q):
        return np.maximum(self.f._eval(q), self.g._eval(q))

    def asymptotic(self):
        return _larger(self.f.asymptotic(), self.g.asymptotic())

    def expr(self):
        return f"max({self.f.expr()},{self.g.expr()})"


class _PartialSums:
    """Lazily extended prefix sums ``v(q) = sum_{t<=q} psi1(t) psi2(t)``."""

    cap = 1 << 22

    def __init__(self, psi1, psi2):
        self.psi1, self.psi2 = psi1, psi2
        self._cum = np.zeros(1)

    def __call__(self, q):
        q = np.floor(q).astype(np.int64)
        top = int(q.max()) if q.size else 0
        if top > self.cap:
            raise ValidationError(f"partial sums are only tabulated up to q = {self.cap}")
        if top >= self._cum.size:
            n = max(top + 1, 2 * self._cum.size)
            n = min(n, self.cap + 1)
            t = np.arange(self._cum.size, n, dtype=float)
            ext = np.cumsum(self.psi1._eval(t) * self.psi2._eval(t)) + self._cum[-1]
            self._cum = np.concatenate([self._cum, ext])
        return self._cum[q]


@dataclass(frozen=True, eq=False)
class SlowedDown(ApproximatingFunction):
    """``base(q) / sqrt(v(q))`` with ``v`` the partial sums of a product."""

    base: ApproximatingFunction
    sums: _PartialSums = field(repr=False)

    @property
    def horizon(self):
        return min(self.base.horizon, self.sums.cap)

    def _eval(self, q):
        return self.base._eval(q) / np.sqrt(self.sums(q))

    def expr(self):
        return f"slowdown({self.base.expr()})"


def evaluate(psi: ApproximatingFunction, q):
    """Evaluate ``psi`` at a positive integer (or an array of them)."""
    return psi(q)


def reduce_min_max(psi: ApproximatingFunction, phi: ApproximatingFunction):
    """Pointwise ``(min(psi, phi), max(psi, phi))``.

    The product of the pair equals ``psi * phi`` exactly, since at each q
    the two outputs are the two inputs in some order.
    """
    if psi == phi:
        return psi, psi
    return MinOf(psi, phi), MaxOf(psi, phi)


def floor_modify(psi: ApproximatingFunction, e: float) -> FlooredMax:
    return FlooredMax(psi, e)


def slowdown_by_partial_sums(psi1: ApproximatingFunction, psi2: ApproximatingFunction):
    """Divide both functions by ``sqrt(v(q))``, ``v(q) = sum_{t<=q} psi1 psi2``.

    When ``sum psi1 psi2`` diverges the outputs tend to zero while the
    product series still diverges.
    """
    sums = _PartialSums(psi1, psi2)
    return SlowedDown(psi1, sums), SlowedDown(psi2, sums)


def check_eta_lower_bound(psi1, psi2, eta: float, q_max: int = 10**5, enforce: bool = False):
    """Check ``max(psi1(q), psi2(q)) >= q**(-eta)`` for ``q = 1..q_max``.

    Returns the list of violating q (truncated to 10).  Violations warn by
    default and raise when ``enforce`` is true.
    """
    if not eta < 1:
        raise ValidationError(f"eta must be < 1, got {eta}")
    q = np.arange(1, q_max + 1, dtype=float)
    lhs = np.maximum(psi1(q), psi2(q))
    bad = q[lhs < q ** (-eta) * (1 - CONSTRUCTION_TOL)]
    if bad.size:
        msg = (f"max(psi1, psi2) drops below q^-{eta} at {bad.size} of {q_max} "
               f"denominators (first q = {int(bad[0])})")
        if enforce:
            raise ValidationError(msg)
        warnings.warn(msg, stacklevel=2)
    return [int(b) for b in bad[:10]]


# ---------------------------------------------------------------------------
# dimension functions


def _check_regularity_witness(h, witness):
    r0, lam1, lam2 = (float(w) for w in witness)
    for name, val in (("r0", r0), ("lambda1", lam1), ("lambda2", lam2)):
        if not 0 < val < 1:
            raise ValidationError(f"regularity {name} must lie in (0, 1), got {val}")
    grid = np.geomspace(r0 * 1e-12, r0, 400, endpoint=False)
    if np.any(h(lam1 * grid) > lam2 * h(grid) * (1 + CONSTRUCTION_TOL)):
        raise ValidationError("regularity witness fails on the probe grid")


class DimensionFunction:
    """Base class for dimension functions ``h``.

    ``regularity`` is an optional ``(r0, lambda1, lambda2)`` witness that is
    validated on a geometric grid when the object is built.
    """

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        if arr.size and np.any(arr < 0):
            raise ValidationError("dimension functions take nonnegative radii")
        out = self._eval(arr)
        return float(out) if np.ndim(r) == 0 else out

    def _eval(self, r):  # pragma: no cover - abstract
        raise NotImplementedError

    def asymptotic(self):
        """Signature ``(s, b)`` with ``h(r) ~ r^s log(1/r)^-b`` as r -> 0."""
        return None

    def _post(self):
        if self.regularity is not None:
            _check_regularity_witness(self, self.regularity)


@dataclass(frozen=True)
class DimPower(DimensionFunction):
    """``h(r) = r**s``."""

    s: float
    regularity: tuple | None = field(default=None, kw_only=True)

    def __post_init__(self):
        check_positive(self.s, "s")
        self._post()

    def _eval(self, r):
        return r**self.s

    def asymptotic(self):
        return (as_fraction(self.s), Fraction(0))

    def expr(self):
        return f"pow(s={self.s!r})"


@dataclass(frozen=True)
class DimPowerLog(DimensionFunction):
    """``h(r) = r**s * L(1/r)**(-a)``, ``L(x) = log(x + e - 1)``."""

    s: float
    a: float
    regularity: tuple | None = field(default=None, kw_only=True)

    def __post_init__(self):
        check_positive(self.s, "s")
        if self.a < -self.s:
            raise ValidationError("powlog dimension function needs a >= -s")
        self._post()

    def _eval(self, r):
        with np.errstate(divide="ignore"):
            out = r**self.s * _ell(1.0 / r) ** (-self.a)
        return np.where(r == 0, 0.0, out)

    def asymptotic(self):
        return (as_fraction(self.s), as_fraction(self.a))

    def expr(self):
        return f"powlog(s={self.s!r},a={self.a!r})"


@dataclass(frozen=True)
class DimIdentity(DimensionFunction):
    """``h(r) = r`` (Lebesgue measure)."""

    regularity: tuple | None = field(default=None, kw_only=True)

    def __post_init__(self):
        self._post()

    def _eval(self, r):
        return r * 1.0

    def asymptotic(self):
        return (Fraction(1), Fraction(0))

    def expr(self):
        return "id"


@dataclass(frozen=True, eq=False)
class DimTable(DimensionFunction):
    """Piecewise-linear ``h`` through ``(0, 0)`` and the given knots.

    Constant beyond the last knot.
    """

    radii: tuple
    values: tuple
    regularity: tuple | None = field(default=None, kw_only=True)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.shape != v.shape or r.ndim != 1 or r.size == 0:
            raise ValidationError("radii and values must be equal-length 1-d sequences")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValidationError("radii must be positive and strictly increasing")
        if np.any(np.diff(v) < -CONSTRUCTION_TOL) or np.any(v <= 0):
            raise ValidationError("table dimension function must be positive and nondecreasing")
        object.__setattr__(self, "_r", np.concatenate([[0.0], r]))
        object.__setattr__(self, "_v", np.concatenate([[0.0], v]))
        self._post()

    def _eval(self, r):
        return np.interp(r, self._r, self._v)

    def expr(self):
        return f"table(<{len(self.radii)} knots>)"


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the ``r^-1 h(r)`` admissibility test."""

    admissible: bool
    decreasing: bool
    unbounded: bool
    method: str
    reason: str = ""


@dataclass(frozen=True)
class RegularityReport:
    holds: bool
    lambda2: float
    counterexample: float | None = None


def _default_probe_grid():
    return np.geomspace(1e-1, 1e-12, 45)


def check_t04_admissible(h: DimensionFunction, grid=None, growth: float = 10.0) -> AdmissibilityReport:
    """Test whether ``r^-1 h(r)`` is decreasing in r and unbounded as r -> 0.

    Power and identity families are decided from the exponent; the
    power-log family decides the limit from its exponents and monotonicity
    on the grid; tables are judged on the grid alone (unbounded means the
    ratio grew by ``growth`` from grid head to tail and kept rising over the
    last three points).
    """
    grid = _default_probe_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValidationError("probe grid is empty")
    if np.any(grid <= 0) or np.any(grid >= 1) or np.any(np.diff(grid) >= 0):
        raise ValidationError("probe grid must be a decreasing sequence in (0, 1)")

    if isinstance(h, DimIdentity):
        return AdmissibilityReport(False, True, False, "closed-form",
                                   "h(r) = r: r^-1 h(r) is constant (Lebesgue case)")
    if isinstance(h, DimPower):
        s = as_fraction(h.s)
        unbounded = s < 1
        decreasing = s <= 1
        reason = "" if unbounded else f"r^-1 h(r) = r^{float(s - 1):g} does not blow up"
        return AdmissibilityReport(unbounded and decreasing, decreasing, unbounded,
                                   "closed-form", reason)

    ratio = h(grid) / grid
    # along a decreasing grid, "decreasing in r" means nondecreasing here
    decreasing = bool(np.all(np.diff(ratio) >= -CONSTRUCTION_TOL * np.abs(ratio[:-1])))
    if isinstance(h, DimPowerLog):
        s, b = h.asymptotic()
        unbounded = s < 1 or (s == 1 and b < 0)
        method = "closed-form limit, grid monotonicity"
    else:
        tail = ratio[-3:]
        unbounded = bool(ratio[-1] > growth * ratio[0] and np.all(np.diff(tail) > 0))
        method = "grid"
    reasons = []
    if not decreasing:
        reasons.append("r^-1 h(r) not monotone on grid")
    if not unbounded:
        reasons.append("r^-1 h(r) does not blow up")
    return AdmissibilityReport(decreasing and unbounded, decreasing, unbounded, method,
                               "; ".join(reasons))


def check_regular(h: DimensionFunction, lambda1: float, grid=None) -> RegularityReport:
    """Candidate ``lambda2 = sup h(lambda1 r) / h(r)`` over the grid.

    Regularity holds iff the supremum is below one; otherwise the grid
    radius attaining it is returned as the counterexample.
    """
    if not 0 < lambda1 < 1:
        raise ValidationError(f"lambda1 must lie in (0, 1), got {lambda1}")
    grid = np.geomspace(1e-12, 0.5, 200) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValidationError("grid must be nonempty and positive")
    hr = h(grid)
    if np.any(hr == 0):
        raise ValidationError("h vanishes at a grid point")
    ratios = h(lambda1 * grid) / hr
    i = int(np.argmax(ratios))
    lam2 = float(ratios[i])
    holds = lam2 < 1
    return RegularityReport(holds, lam2, None if holds else float(grid[i]))


# ---------------------------------------------------------------------------
# text expressions

_TABLE_RE = re.compile(r"table\(\s*([^\"'()=][^()]*?)\s*\)")


def _quote_table_paths(text):
    return _TABLE_RE.sub(lambda m: f'table("{m.group(1)}")', text)


def _node_number(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _node_number(node.operand)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
        return _node_number(node.left) / _node_number(node.right)
    raise ValidationError(f"expected a number, got {ast.unparse(node)!r}")


def _call_parts(node, text):
    if isinstance(node, ast.Name):
        return node.id, [], {}
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ValidationError(f"cannot parse function expression {text!r}")
    kwargs = {kw.arg: kw.value for kw in node.keywords}
    return node.func.id, list(node.args), kwargs


def _parse_psi(node, text, base_dir):
    name, args, kw = _call_parts(node, text)
    num = {k: _node_number(v) for k, v in kw.items() if k != "path"}
    try:
        if name in ("pow", "power"):
            if args:
                num.setdefault("v", _node_number(args[0]))
            return Power(num["v"], num.get("c", 1.0))
        if name == "powlog":
            return PowerLog(num["v"], num.get("a", 0.0), num.get("c", 1.0))
        if name in ("min", "max"):
            if len(args) != 2:
                raise ValidationError(f"{name} takes two functions")
            f, g = (_parse_psi(a, text, base_dir) for a in args)
            return MinOf(f, g) if name == "min" else MaxOf(f, g)
        if name == "floor":
            inner = _parse_psi(args[0], text, base_dir)
            e = num["e"] if "e" in num else _node_number(args[1])
            return FlooredMax(inner, e)
        if name == "scale":
            inner = _parse_psi(args[0], text, base_dir)
            k = num["k"] if "k" in num else _node_number(args[1])
            return Scaled(inner, k)
        if name == "table":
            path = Path(args[0].value if args else kw["path"].value)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return Table.from_csv(path)
    except KeyError as exc:
        raise ValidationError(f"missing parameter {exc.args[0]!r} in {text!r}") from None
    except IndexError:
        raise ValidationError(f"missing argument in {text!r}") from None
    raise ValidationError(f"unknown function family {name!r} in {text!r}")


def parse_function(text: str, base_dir=None) -> ApproximatingFunction:
    """Parse ``pow(v=0.6)``, ``powlog(v=1,a=1)``, ``min(f,g)``, ``max(f,g)``,
    ``floor(f,e=0.6667)``, ``scale(f,k=2)`` or ``table(path)``."""
    text = text.strip()
    try:
        tree = ast.parse(_quote_table_paths(text), mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse function expression {text!r}") from exc
    return _parse_psi(tree.body, text, base_dir)


def parse_dimension(text: str, base_dir=None) -> DimensionFunction:
    """Parse ``pow(s=0.9)``, ``powlog(s=0.9,a=1)``, ``id`` or ``table(path)``.

    Table files have two columns ``r,h``.
    """
    text = text.strip()
    try:
        tree = ast.parse(_quote_table_paths(text), mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse dimension function {text!r}") from exc
    name, args, kw = _call_parts(tree.body, text)
    try:
        if name in ("id", "identity", "lebesgue"):
            return DimIdentity()
        if name in ("pow", "power"):
            s = _node_number(kw["s"]) if "s" in kw else _node_number(args[0])
            return DimPower(s)
        if name == "powlog":
            return DimPowerLog(_node_number(kw["s"]), _node_number(kw.get("a", ast.Constant(0.0))))
        if name == "table":
            path = Path(args[0].value if args else kw["path"].value)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            data = np.genfromtxt(path, delimiter=",", comments="#")
            data = data[~np.isnan(data).any(axis=1)]
            return DimTable(tuple(data[:, 0]), tuple(data[:, 1]))
    except (KeyError, IndexError):
        raise ValidationError(f"missing parameter in {text!r}") from None
    raise ValidationError(f"unknown dimension family {name!r} in {text!r}")
