import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dioph_curves._validation import ValidationError
from dioph_curves.curves import (
    CircleArc,
    Cubic,
    DegenerateCurve,
    ExpCurve,
    Parabola,
    PolynomialCurve,
    SinCurve,
    decompose_nondegenerate,
    parse_curve,
    select_xi,
)

CURVES = [
    Parabola(),
    Cubic(),
    PolynomialCurve((1, 0, -2, Fraction(1, 2)), (0.0, 1.0)),
    CircleArc(),
    ExpCurve(),
    SinCurve(),
]


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.spec())
def test_derivatives_match_finite_differences(curve):
    lo, hi = curve.interval
    x = np.linspace(lo + 0.01, hi - 0.01, 50)
    h = 1e-6
    for fn, dfn in [(curve.f, curve.df), (curve.df, curve.d2f), (curve.d2f, curve.d3f)]:
        fd = (fn(x + h) - fn(x - h)) / (2 * h)
        assert np.allclose(fd, dfn(x), rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.spec())
def test_mp_evaluator_agrees(curve):
    lo, hi = curve.interval
    for x in np.linspace(lo, hi, 7):
        assert float(curve.f_mp(mpmath.mpf(float(x)))) == pytest.approx(float(curve.f(x)), rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.spec())
def test_sup_abs_df_dominates_grid(curve):
    lo, hi = curve.interval
    grid = np.linspace(lo, hi, 10001)
    assert curve.sup_abs_df() >= np.max(np.abs(curve.df(grid))) - 1e-12


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.spec())
def test_image_range_brackets_grid(curve):
    lo, hi = curve.interval
    a = np.linspace(lo, hi, 30)[:-1]
    b = a + (hi - lo) / 29
    m, M = curve.image_range(a, b)
    for x0, x1, mm, MM in zip(a, b, m, M):
        vals = curve.f(np.linspace(x0, x1, 200))
        assert mm <= vals.min() + 1e-12 and MM >= vals.max() - 1e-12


def test_parabola_single_piece():
    dec = decompose_nondegenerate(Parabola())
    assert len(dec.pieces) == 1
    p = dec.pieces[0]
    assert (p.lo, p.hi, p.c1, p.c2) == (0.0, 1.0, 2.0, 2.0)
    assert dec.excluded_measure == 0.0


def test_cubic_margin():
    dec = decompose_nondegenerate(Cubic(), margin=0.1)
    spans = [(p.lo, p.hi) for p in dec.pieces]
    assert spans == [(-1.0, pytest.approx(-0.1)), (pytest.approx(0.1), 1.0)]
    for p in dec.pieces:
        assert p.c1 == pytest.approx(0.6)
        assert p.c2 == pytest.approx(6.0)
    assert dec.excluded_measure == pytest.approx(0.2)


def test_sin_pieces_cover_and_are_short():
    dec = decompose_nondegenerate(SinCurve(), margin=0.1)
    assert dec.pieces[0].lo == pytest.approx(0.1)
    assert dec.pieces[-1].hi == pytest.approx(math.pi - 0.1)
    for a, b in zip(dec.pieces[:-1], dec.pieces[1:]):
        assert a.hi == b.lo
    assert all(p.length <= 1 + 1e-12 for p in dec.pieces)
    assert min(p.c1 for p in dec.pieces) == pytest.approx(math.sin(0.1))
    assert max(p.c2 for p in dec.pieces) == pytest.approx(1.0)


@pytest.mark.parametrize("curve", CURVES[:-1] + [SinCurve((0.2, 3.0))], ids=lambda c: c.spec())
def test_piece_bounds_hold_on_grid(curve):
    dec = decompose_nondegenerate(curve, margin=0.1)
    for p in dec.pieces:
        x = np.linspace(p.lo, p.hi, 2001)
        d2 = np.abs(curve.d2f(x))
        assert d2.min() >= p.c1 - 1e-12
        assert d2.max() <= p.c2 + 1e-12
        assert p.sup_abs_df >= np.abs(curve.df(x)).max() - 1e-12
        # Hoelder bound on pairs of grid points
        i, j = np.triu_indices(len(x[::50]), 1)
        xs = x[::50]
        gap = np.abs(xs[i] - xs[j])
        assert np.all(np.abs(curve.d2f(xs[i]) - curve.d2f(xs[j])) <= p.lipschitz * gap**p.xi + 1e-12)


def test_linear_poly_is_degenerate():
    with pytest.raises(DegenerateCurve):
        decompose_nondegenerate(PolynomialCurve((1, 2), (0.0, 1.0)))


@pytest.mark.parametrize(
    "eta, xi", [(0.5, 2 / 3), (1 / 3, 0.8), (0.0, 0.8), (0.9, (1.7 / 1.9 + 1) / 2)]
)
def test_select_xi(eta, xi):
    assert select_xi(eta) == pytest.approx(xi)


@given(eta=st.floats(-0.99, 0.999))
def test_select_xi_in_range(eta):
    xi = select_xi(eta)
    assert (3 * eta - 1) / (1 + eta) < xi < 1


@pytest.mark.parametrize("eta", [1.0, 1.5, -1.0, -2.0])
def test_select_xi_rejects(eta):
    with pytest.raises(ValidationError):
        select_xi(eta)


@pytest.mark.parametrize(
    "text, family, interval",
    [
        ("parabola", "parabola", (0.0, 1.0)),
        ("cubic", "cubic", (-1.0, 1.0)),
        ("parabola(interval=[0.2,0.8])", "parabola", (0.2, 0.8)),
        ("poly(1,0,-2,0.5)", "poly", (0.0, 1.0)),
        ("circle", "circle", (-0.9, 0.9)),
        ("sin(interval=[0.1,3])", "sin", (0.1, 3.0)),
        ("exp", "exp", (0.0, 1.0)),
    ],
)
def test_parse_curve(text, family, interval):
    c = parse_curve(text)
    assert c.name == family
    assert c.interval == interval


def test_parse_poly_keeps_exact_coefficients():
    c = parse_curve("poly(1,0,-2,0.5)")
    assert c.f_exact(Fraction(1, 3)) == 1 - Fraction(2, 9) + Fraction(1, 54)


def test_parse_curve_override_interval():
    assert parse_curve("parabola(interval=[0.2,0.8])", (0.0, 0.5)).interval == (0.0, 0.5)


@pytest.mark.parametrize("text", ["ellipse", "parabola(k=1)", "1+", "circle(interval=[-1,0.5])",
                                  "parabola(interval=[1,0])"])
def test_parse_curve_rejects(text):
    with pytest.raises(ValidationError):
        parse_curve(text)


def test_spec_round_trip():
    for c in CURVES:
        assert parse_curve(c.spec()).interval == c.interval
