import cmath
import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab import core, periodic

A, C = sp.Rational(3, 10), sp.Rational(-7, 5)


def resultant_roots(n):
    """z-coordinates of all points of period dividing n, by elimination.

    A cycle is a sequence with ``x[k+1] = x[k]^2 + c + a x[k-1]`` read cyclically.
    """
    x = sp.symbols(f"x0:{n}")
    eqs = [x[(k + 1) % n] - x[k] ** 2 - C - A * x[(k - 1) % n] for k in range(n)]
    if n == 1:
        poly = eqs[0]
    elif n == 2:
        poly = sp.resultant(eqs[0], eqs[1], x[1])
    else:
        # the first equation is linear in x2
        x2 = sp.solve(eqs[0], x[2])[0]
        e1 = sp.numer(sp.together(eqs[1].subs(x[2], x2)))
        e2 = sp.numer(sp.together(eqs[2].subs(x[2], x2)))
        poly = sp.resultant(e1, e2, x[1])
    coeffs = [complex(c) for c in sp.Poly(sp.expand(poly), x[0]).all_coeffs()]
    return np.roots(coeffs)


@pytest.fixture(scope="module")
def generic_map():
    return core.ComposedAutomorphism.single(float(A), float(C))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_points_match_resultant_oracle(generic_map, n):
    roots = resultant_roots(n)
    assert len(roots) == 2 ** n
    found = periodic.find_periodic(generic_map, n)
    z = np.concatenate([o.points[:, 0] for o in found])
    assert len(z) == 2 ** n
    # each oracle root is matched by exactly one found point
    dist = np.abs(roots[:, None] - z[None, :])
    assert np.all(dist.min(axis=1) < 1e-6)
    assert sorted(np.argmin(dist, axis=1)) == list(range(2 ** n))


def test_fixed_point_closed_form(sink_saddle_map):
    orbits = periodic.find_periodic(sink_saddle_map, 1)
    pts = sorted(o.points[0, 0].real for o in orbits)
    assert pts == pytest.approx([0.0, 0.5], abs=1e-12)
    assert all(abs(o.points[0, 0].imag) < 1e-14 for o in orbits)
    by_z = {round(o.points[0, 0].real, 6): o for o in orbits}
    sad, sink = by_z[0.5], by_z[0.0]
    assert sad.classification == periodic.SADDLE
    assert sink.classification == periodic.SINK
    assert abs(sad.lambda_u - (1 + math.sqrt(3)) / 2) < 1e-10
    assert abs(sad.lambda_s - (1 - math.sqrt(3)) / 2) < 1e-10
    assert sorted(abs(v) for v in sink.eigenvalues) == pytest.approx([math.sqrt(0.5)] * 2)
    assert sad.chi_u == pytest.approx(math.log((1 + math.sqrt(3)) / 2), abs=1e-12)


def test_determinant_identity_on_every_orbit(horseshoe_orbits, horseshoe):
    for n, orbits in horseshoe_orbits.items():
        for o in orbits:
            jac = horseshoe.jacobian ** o.period
            assert abs(o.lambda_s * o.lambda_u - jac) <= 1e-8 * abs(jac)
            assert abs(np.trace(o.monodromy) - (o.lambda_s + o.lambda_u)) <= 1e-8 * abs(o.lambda_u)


def test_horseshoe_counts_and_saddles(horseshoe_orbits, horseshoe):
    for n, orbits in horseshoe_orbits.items():
        row = periodic.census_row(horseshoe, orbits, n)
        assert row.fix_count == 2 ** n
        assert row.ratio == 1.0
        assert not row.low_confidence


def test_exact_period_counts_follow_moebius(horseshoe_orbits):
    # number of points of exact period n: sum over divisors m of mu(n/m) 2^m
    for n, orbits in horseshoe_orbits.items():
        exact = sum(o.period for o in orbits if not o.lower_period)
        expect = sum(int(sp.mobius(n // m)) * 2 ** m for m in sp.divisors(n))
        assert exact == expect


def test_dedup_idempotent(generic_map):
    found = periodic.find_periodic(generic_map, 3)
    seeds = np.concatenate([np.roll(o.points, k, axis=0)[None] for o in found
                            if not o.lower_period for k in range(o.period)])
    again = periodic.find_periodic(generic_map, 3, seeds=np.concatenate([seeds, seeds]))
    assert [o.key for o in again] == [o.key for o in found if not o.lower_period]


def test_orbit_records_round_trip(horseshoe_orbits):
    recs = json.loads(periodic.orbits_json(horseshoe_orbits[2]))
    assert [r["id"] for r in recs] == [o.key for o in horseshoe_orbits[2]]
    assert all(r["classification"] == "saddle" for r in recs)


def test_census_csv_header(sink_saddle_map):
    text = periodic.census_csv(periodic.census(sink_saddle_map, 2))
    lines = text.splitlines()
    assert lines[0] == "n,fix_count,sper_count,ratio,mean_chi_u,weighted_chi_u,low_confidence"
    assert lines[1].startswith("1,2,1,0.5,")


@settings(max_examples=60, deadline=None)
@given(a=st.complex_numbers(min_magnitude=0.05, max_magnitude=0.9, allow_nan=False, allow_infinity=False),
       c=st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
def test_fixed_points_quadratic(a, c):
    # fixed points solve z^2 + (a - 1) z + c = 0
    f = core.ComposedAutomorphism.single(a, c)
    roots = np.roots([1, a - 1, c])
    found = periodic.find_periodic(f, 1)
    if abs(roots[0] - roots[1]) < 1e-3:
        return
    z = np.array([o.points[0, 0] for o in found])
    assert len(z) == 2
    assert np.all(np.min(np.abs(z[:, None] - roots[None]), axis=1) < 1e-8)
    for o in found:
        M = periodic.monodromy(f, o.points)
        ev = np.linalg.eigvals(M)
        assert np.min(np.abs(ev - o.lambda_u)) < 1e-8 * max(1, abs(o.lambda_u))


def test_classification_bands():
    assert periodic.classify_multipliers(0.5, 2.0) == periodic.SADDLE
    assert periodic.classify_multipliers(0.5, 0.7) == periodic.SINK
    assert periodic.classify_multipliers(1.5, 2.0) == periodic.SOURCE
    assert periodic.classify_multipliers(0.5, cmath.exp(0.3j)) == periodic.NEUTRAL


@settings(max_examples=40, deadline=None)
@given(a=st.complex_numbers(min_magnitude=0.05, max_magnitude=1.0, allow_nan=False, allow_infinity=False),
       c=st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
def test_period_two_count_is_complete(a, c):
    f = core.ComposedAutomorphism.single(a, c)
    found = periodic.find_periodic(f, 2)
    # coincident cycles only occur on a parameter set of measure zero
    assert found.point_count == 4 or min(
        np.min(np.abs(np.roots([1, a - 1, c])[0] - np.roots([1, a - 1, c])[1])), 1) < 1e-3
    for o in found:
        assert o.residual < 1e-10
