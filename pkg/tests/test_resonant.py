import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dioph_curves._validation import ValidationError
from dioph_curves.curves import Curve, Cubic, Parabola, PolynomialCurve, SinCurve
from dioph_curves.resonant import (
    ComputeGuard,
    ExactRational,
    ShiftedQuery,
    StrictFloat,
    brute_force_oracle,
    count_N,
    count_query,
    enumerate_AQ,
    enumerate_arrays,
    exact_p_range,
    parse_policy,
    q_chunks,
)

from conftest import THETA_IRR


def literal_count(curve_f, lo, hi, Q, delta, theta):
    """Double loop over exact rationals; ``curve_f`` maps Fraction -> Fraction."""
    t1, t2 = (Fraction(t) for t in theta)
    lo, hi = Fraction(lo), Fraction(hi)
    n = 0
    for q in range(1, Q + 1):
        for a in range(math.floor(q * lo - t1) - 1, math.ceil(q * hi - t1) + 2):
            x = (a + t1) / q
            if lo <= x <= hi:
                y = q * curve_f(x) - t2
                if abs(y - round(y)) < delta:
                    n += 1
    return n


def sq(x):
    return x * x


def test_policy_parsing():
    assert parse_policy("strict") == StrictFloat()
    assert parse_policy("strict:1e-9") == StrictFloat(1e-9)
    assert parse_policy("exact") == ExactRational()
    with pytest.raises(ValidationError):
        parse_policy("loose")


def test_threshold_above_half_warns_and_counts_everything():
    with pytest.warns(UserWarning):
        q = ShiftedQuery(Parabola(), 20, threshold=0.6)
    # every (p1, q) with p1/q in [0, 1] qualifies
    assert count_query(q) == sum(q_ + 1 for q_ in range(1, 21))


def test_q32_list_matches_double_loop():
    pts = enumerate_AQ(ShiftedQuery(Parabola(), 32, delta=Fraction(1, 10), policy="exact"))
    expected = []
    for q in range(1, 33):
        for a in range(q + 1):
            y = Fraction(a * a, q)
            p2 = round(y)
            if abs(y - p2) < Fraction(1, 10):
                expected.append((q, a, p2))
    assert [(p.q, p.p1, p.p2) for p in pts] == expected
    assert all(p.weight == p.q for p in pts)


@pytest.mark.parametrize("policy", ["strict", "exact"])
def test_integer_shift_invariance(policy):
    a = enumerate_arrays(ShiftedQuery(Parabola(), 64, delta=0.2, theta=(0.3, 0.7), policy=policy))
    b = enumerate_arrays(ShiftedQuery(Parabola(), 64, delta=0.2, theta=(1.3, -0.3), policy=policy))
    assert np.array_equal(a[0], b[0])
    # p1 + theta1 and p2 + theta2 stay fixed
    assert np.array_equal(a[1], b[1] + 1)
    assert np.array_equal(a[2], b[2] - 1)


def test_small_example_against_oracle_and_literal():
    n = count_N(Parabola(), (0, 1), 10, 0.25)
    assert n == brute_force_oracle(Parabola(), (0, 1), 10, 0.25)
    assert n == literal_count(sq, 0, 1, 10, Fraction(1, 4), (0, 0))


@pytest.mark.parametrize("theta", [(0, 0), (Fraction(1, 3), Fraction(1, 2)), (0.25, 0.75)])
@pytest.mark.parametrize("delta", [0.05, 0.1, 0.3])
def test_float_and_exact_agree_with_literal(theta, delta):
    lit = literal_count(sq, 0, 1, 60, Fraction(repr(delta)), theta)
    assert count_N(Parabola(), (0, 1), 60, delta, theta, "exact") == lit
    assert count_N(Parabola(), (0, 1), 60, delta, theta) == lit


def test_monotone_in_Q_delta_window():
    c = Cubic()
    Ns = [count_N(c, (0.1, 1), Q, 0.1) for Q in (16, 32, 64, 128)]
    assert Ns == sorted(Ns)
    Ds = [count_N(c, (0.1, 1), 64, d) for d in (0.01, 0.05, 0.1, 0.3)]
    assert Ds == sorted(Ds)
    assert count_N(c, (0.2, 0.5), 64, 0.1) <= count_N(c, (0.1, 1), 64, 0.1)


@pytest.mark.parametrize("theta", [(0, 0), THETA_IRR])
def test_count_band_smaller_range(theta):
    for t in range(8, 12):
        Q, delta = 2**t, 2.0 ** (-t / 2)
        ratio = count_N(Parabola(), (0, 1), Q, delta, theta) / (delta * Q**2)
        assert 0.5 <= ratio <= 2.0


PIECES = [(Parabola(), (0.0, 1.0)), (Cubic(), (0.1, 1.0)), (Cubic(), (-1.0, -0.1)),
          (SinCurve(), (0.2, 1.5))]


@given(
    idx=st.integers(0, len(PIECES) - 1),
    Q=st.integers(1, 128),
    delta=st.floats(1e-3, 0.49),
    t1=st.fractions(0, 1, max_denominator=12),
    t2=st.fractions(0, 1, max_denominator=12),
)
@settings(max_examples=60, deadline=None)
def test_random_configs_match_oracle(idx, Q, delta, t1, t2):
    curve, iv = PIECES[idx]
    assert count_N(curve, iv, Q, delta, (t1, t2)) == brute_force_oracle(curve, iv, Q, delta, (t1, t2))


@given(Q=st.integers(1, 96), delta=st.floats(1e-3, 0.49))
@settings(max_examples=30, deadline=None)
def test_exact_policy_matches_exact_oracle(Q, delta):
    c = PolynomialCurve((0, Fraction(1, 3), 0, 1), (0.0, 1.0))
    assert count_N(c, (0, 1), Q, delta, (Fraction(1, 5), 0), "exact") == \
        brute_force_oracle(c, (0, 1), Q, delta, (Fraction(1, 5), 0), "exact")


def test_small_delta_limit_counts_exact_hits():
    # as delta -> 0 only points with a^2/q integral remain
    Q = 50
    exact = sum(1 for q in range(1, Q + 1) for a in range(q + 1) if (a * a) % q == 0)
    assert count_N(Parabola(), (0, 1), Q, 1e-9, policy="exact") == exact
    assert count_N(Parabola(), (0, 1), Q, 1e-9, policy=StrictFloat(0.0)) == exact


def test_empty_window():
    assert count_N(Parabola(), (0.5, 0.4), 100, 0.1) == 0
    assert brute_force_oracle(Parabola(), (0.5, 0.4), 100, 0.1) == 0


@pytest.mark.parametrize("threads", [1, 2, 4, 8])
def test_thread_count_does_not_change_output(threads):
    q = ShiftedQuery(Cubic(), 300, window=(0.1, 1), delta=0.05, theta=THETA_IRR)
    ref = enumerate_arrays(q, threads=1)
    got = enumerate_arrays(q, threads=threads)
    for a, b in zip(ref, got):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("delta", [0.5, 0.7, 0, -0.1])
def test_count_rejects_delta(delta):
    with pytest.raises(ValidationError):
        count_N(Parabola(), (0, 1), 10, delta)


def test_oracle_guard():
    with pytest.raises(ComputeGuard):
        brute_force_oracle(Parabola(), (0, 1), 513, 0.1)


def test_window_outside_interval_rejected():
    with pytest.raises(ValidationError):
        count_N(Parabola(), (0, 2), 10, 0.1)


def test_exact_policy_requires_polynomial():
    with pytest.raises(ValidationError):
        ShiftedQuery(SinCurve(), 10, delta=0.1, policy="exact")
    with pytest.raises(ValidationError):
        ShiftedQuery(Parabola(), 10, threshold=lambda q: 1 / q, policy="exact")


def test_query_requires_one_cut_off():
    with pytest.raises(ValidationError):
        ShiftedQuery(Parabola(), 10)
    with pytest.raises(ValidationError):
        ShiftedQuery(Parabola(), 10, delta=0.1, threshold=0.1)


class _Pole(Curve):
    name = "pole"
    interval = (0.0, 1.0)

    def f(self, x):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(x, dtype=float)


def test_nonfinite_curve_raises():
    with pytest.raises(ValidationError):
        count_N(_Pole(), (0, 1), 10, 0.1)


@pytest.mark.parametrize("lower", ["all", "half"])
def test_enumeration_invariants(lower):
    q = ShiftedQuery(Cubic(), 200, window=(0.1, 1), lower=lower, threshold=lambda qs: qs**-1.5,
                     theta=(0.25, 0.5))
    pts = enumerate_AQ(q)
    assert pts == sorted(pts)
    for p in pts:
        assert q.q_start <= p.q <= 200
        x = (p.p1 + 0.25) / p.q
        assert x == pytest.approx(p.x)
        assert 0.1 <= x <= 1
        assert abs(x**3 - (p.p2 + 0.5) / p.q) == pytest.approx(p.residual, abs=1e-13)
        assert p.residual < p.q**-1.5
    if lower == "half":
        assert q.q_start == 101


def test_overu_start():
    q = ShiftedQuery(Parabola(), 100, lower="overu", u=lambda t: 4.0, delta=0.1)
    assert q.q_start == 26


@given(q=st.integers(1, 10**6), lo=st.fractions(0, 1, max_denominator=50),
       w=st.fractions(0, 1, max_denominator=50), f1=st.fractions(0, 1, max_denominator=50))
def test_exact_p_range(q, lo, w, f1):
    hi = lo + w
    p_lo, p_hi = exact_p_range(np.array([q]), float(lo), float(hi), f1)
    assert p_lo[0] == math.ceil(q * Fraction(float(lo)) - f1)
    assert p_hi[0] == math.floor(q * Fraction(float(hi)) - f1)


def test_q_chunks_partition():
    chunks = q_chunks(1, 10001, 1.0, budget=5000)
    assert chunks[0][0] == 1 and chunks[-1][1] == 10001
    assert all(a[1] == b[0] for a, b in zip(chunks[:-1], chunks[1:]))
    assert len(chunks) > 1
