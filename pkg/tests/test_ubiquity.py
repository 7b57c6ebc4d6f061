import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dioph_curves._validation import ValidationError
from dioph_curves.curves import Parabola
from dioph_curves.funcs import DimPower, Power, Table
from dioph_curves.resonant import ShiftedQuery, enumerate_arrays
from dioph_curves.series import dimension_s0, weighted_term
from dioph_curves.ubiquity import (
    DEFAULT_C_GRID,
    StaircaseIncomplete,
    UbiquityWiring,
    build_u_partial_sums,
    build_u_staircase,
    default_u,
    interval_union_measure,
    minimal_C,
    verify_local_ubiquity,
)

from conftest import THETA_IRR


def union_oracle(pairs, window=None):
    """Merge by repeated scanning, one interval at a time."""
    merged = []
    for a, b in pairs:
        if window is not None:
            a, b = max(a, window[0]), min(b, window[1])
        if b <= a:
            continue
        merged.append([a, b])
        changed = True
        while changed:
            changed = False
            for i in range(len(merged)):
                for j in range(i + 1, len(merged)):
                    x, y = merged[i], merged[j]
                    if x[0] <= y[1] and y[0] <= x[1]:
                        merged[i] = [min(x[0], y[0]), max(x[1], y[1])]
                        del merged[j]
                        changed = True
                        break
                if changed:
                    break
    return sum(b - a for a, b in merged)


def union_sorted_loop(pairs, window):
    """Plain sorted sweep; independent of the numpy cumulative-max merge."""
    total, cur = 0.0, None
    for a, b in sorted((max(a, window[0]), min(b, window[1])) for a, b in pairs):
        if b <= a:
            continue
        if cur is None or a > cur[1]:
            if cur is not None:
                total += cur[1] - cur[0]
            cur = [a, b]
        else:
            cur[1] = max(cur[1], b)
    return total + (cur[1] - cur[0] if cur else 0.0)


intervals = st.lists(
    st.tuples(st.floats(-10, 10), st.floats(0, 5)).map(lambda t: (t[0], t[0] + t[1])),
    max_size=30,
)


@given(pairs=intervals)
@settings(max_examples=200, deadline=None)
def test_union_matches_oracle(pairs):
    lo = [a for a, _ in pairs]
    hi = [b for _, b in pairs]
    assert interval_union_measure(lo, hi) == pytest.approx(union_oracle(pairs), abs=1e-9)
    assert interval_union_measure(lo, hi, (-2, 3)) == pytest.approx(
        union_oracle(pairs, (-2, 3)), abs=1e-9)


@given(pairs=intervals, seed=st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_union_order_independent_and_idempotent(pairs, seed):
    lo = np.array([a for a, _ in pairs], dtype=float)
    hi = np.array([b for _, b in pairs], dtype=float)
    perm = np.random.default_rng(seed).permutation(len(pairs))
    m = interval_union_measure(lo, hi)
    assert interval_union_measure(lo[perm], hi[perm]) == pytest.approx(m, abs=1e-12)
    assert interval_union_measure(np.r_[lo, lo], np.r_[hi, hi]) == pytest.approx(m, abs=1e-12)


def test_union_examples():
    assert interval_union_measure([0, 0.5, 2], [1, 1.5, 3]) == 2.5
    assert interval_union_measure([], []) == 0.0
    with pytest.raises(ValidationError):
        interval_union_measure([0, 1], [1])


def test_staircase_constant_term():
    u = build_u_staircase(lambda l: np.ones_like(l), n_terms=10)
    assert list(u.ends) == [2, 4, 6, 8, 10]
    l = np.arange(1, 11)
    assert np.array_equal(u(l), np.ceil(l / 2).astype(int))
    assert u.boundaries == [1, 3, 5, 7, 9, 11]


def test_staircase_convergent_term_stalls():
    with pytest.raises(StaircaseIncomplete) as info:
        build_u_staircase(lambda l: l**-2.0)
    assert info.value.blocks == 1


@pytest.mark.parametrize("term", [lambda l: 1.0 / l, lambda l: 0.3 + 0 * l, lambda l: 1 / np.sqrt(l)])
def test_staircase_invariants(term):
    n = 5000
    u = build_u_staircase(term, n_terms=n)
    vals = term(np.arange(1, n + 1, dtype=float))
    bounds = u.boundaries
    partial = 0.0
    for i, (a, b) in enumerate(zip(bounds[:-1], bounds[1:]), start=1):
        block = vals[a - 1:b - 1]
        assert math.fsum(block) > 1
        assert np.all(u(np.arange(a, b)) == i)
        partial += math.fsum(block) / i
        assert partial >= sum(1 / j for j in range(1, i + 1)) - 1e-12
    assert np.all(np.diff(u(np.arange(1, bounds[-1]))) >= 0)


def test_staircase_at_critical_exponent_has_growing_blocks():
    s0 = float(dimension_s0(0.6, 0.8).s0)
    term = weighted_term(Power(0.8), Power(0.6), DimPower(s0))
    u = build_u_staircase(term, n_terms=10**6)
    lengths = np.diff(u.boundaries)
    assert u.blocks >= 2
    assert lengths[-1] > lengths[0]


def test_partial_sums_constant_terms():
    u = build_u_partial_sums(Power(0.5), Power(0.5))
    q = np.array([0, 1, 2.5, 7, 40])
    assert np.allclose(u(q), np.floor(q) + 1)
    assert u.diverges


def test_partial_sums_bounded():
    u = build_u_partial_sums(Power(0.6), Power(0.6))
    assert not u.diverges
    limit = 1 / (1 - 2**-0.2)
    assert u(200) == pytest.approx(limit, rel=1e-10)
    assert np.all(np.diff(u(np.arange(201))) >= 0)


def test_partial_sums_table_direct():
    vals = 1.0 / np.sqrt(np.arange(1, 2**12 + 1))
    psi = Table(tuple(vals))
    u = build_u_partial_sums(psi, Power(0.5), t_max=12)
    direct = np.cumsum([2.0**t * vals[2**t - 1] * 2.0 ** (-t / 2) for t in range(13)])
    assert np.allclose(u(np.arange(13)), direct, rtol=1e-14)


@pytest.mark.parametrize("v", [0.1, 0.5, 0.99])
def test_halving_for_powers(v):
    w = UbiquityWiring(Power(v))
    assert w.check_halving(40)
    assert w.check_u_unbounded(30.0)
    assert w.check_u_nondecreasing()


def test_halving_for_nonincreasing_table():
    # nonincreasing psi1 halves psi1(t)/t automatically
    w = UbiquityWiring(Power(0.5), psi1=Table((1.0, 0.9, 0.9, 0.5, 0.5, 0.5, 0.1)))
    assert w.check_halving(20)


def test_rho_tends_to_zero():
    w = UbiquityWiring(Power(0.5))
    r = w.rho(2.0 ** np.arange(4, 40))
    assert np.all(np.diff(r) < 0)
    assert r[-1] < 1e-5


def test_default_u():
    assert default_u(0) == 1.0
    assert default_u(6) == 3.0


def test_large_radius_covers_everything():
    reps = verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), Qs=[64], C_grid=[1e6])
    assert reps[0].fraction == 1.0
    assert reps[0].points > 0


def test_fraction_monotone_in_C_and_baseline():
    reps = verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), Qs=[2**10])
    fr = [r.fraction for r in reps]
    assert fr == sorted(fr)
    assert all(0 <= f <= 1 for f in fr)
    assert [r.C for r in reps] == list(DEFAULT_C_GRID)
    # regression baseline recorded from a direct run
    assert minimal_C(reps) == {2**10: 1.0}
    assert sum(r.minimal for r in reps) == 1


def test_coverage_against_direct_merge():
    Q = 256
    reps = verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), THETA_IRR, Qs=[Q],
                                 C_grid=[0.5])
    q = ShiftedQuery(Parabola(), Q, window=(0.1, 0.9), lower="half", threshold=Q**-0.5 / Q,
                     theta=THETA_IRR)
    x = enumerate_arrays(q)[3]
    r = 0.5 / (Q * Q * Q**-0.5)
    pairs = [(a - r, a + r) for a in x]
    assert reps[0].covered == pytest.approx(union_sorted_loop(pairs, (0.1, 0.9)), abs=1e-12)
    assert reps[0].points == x.size


def test_empty_enumeration_reports_zero():
    # no integer lies in J, so q = 1 contributes nothing
    with pytest.warns(UserWarning, match="threshold"):
        reps = verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), Qs=[1], C_grid=[1.0])
    assert reps[0].points == 0 and reps[0].fraction == 0.0
    assert minimal_C(reps) == {1: None}


def test_overu_mode_covers_more_than_half_mode():
    kw = dict(Qs=[512], C_grid=[0.25])
    half = verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), mode="half", **kw)[0]
    overu = verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), mode="overu", **kw)[0]
    assert overu.points >= half.points
    assert overu.fraction >= half.fraction


def test_hypothesis_warning():
    with pytest.warns(UserWarning):
        verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(1.5), Qs=[16, 32], C_grid=[1.0])


@pytest.mark.parametrize("kw", [dict(mode="full"), dict(C_grid=[]), dict(C_grid=[0, 1]),
                                dict(Qs=[0])])
def test_coverage_rejects(kw):
    with pytest.raises(ValidationError):
        verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), **kw)


def test_report_row():
    rep = verify_local_ubiquity(Parabola(), (0.1, 0.9), Power(0.5), Qs=[64], C_grid=[1.0])[0]
    assert set(rep.row()) == {"Q", "C", "fraction", "minimal_C_flag", "points_used"}
