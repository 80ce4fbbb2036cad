import cmath
import dataclasses
import math

import numpy as np
import pytest

from henonlab import core, manifolds, periodic, shadowing


@pytest.fixture(scope="module")
def h0(horseshoe_homoclinic):
    return horseshoe_homoclinic[0]


@pytest.fixture(scope="module")
def table(horseshoe, right_saddle, h0):
    return shadowing.multiplier_asymptotics(horseshoe, right_saddle, h0, range(3, 16))


def test_pseudo_orbit_is_an_exact_segment(horseshoe, h0):
    gaps = []
    for N in range(3, 9):
        pseudo = shadowing.build_pseudo_orbit(horseshoe, h0, N)
        assert pseudo.period == 2 * N + h0.landing
        assert np.max(pseudo.pair_residuals(horseshoe)) < 1e-12
        gaps.append(pseudo.closing_gap)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_pseudo_orbit_rejects_short_segments(horseshoe, h0):
    far = dataclasses.replace(h0, eta=h0.eta * 1e4)
    with pytest.raises(ValueError, match="minimal N"):
        shadowing.build_pseudo_orbit(horseshoe, far, 1)
    with pytest.raises(ValueError):
        shadowing.build_pseudo_orbit(horseshoe, h0, 0)


def test_closed_orbit_matches_periodic_multipliers(horseshoe, h0):
    for N in (3, 4, 5):
        pseudo = shadowing.build_pseudo_orbit(horseshoe, h0, N)
        orb = shadowing.close_orbit(horseshoe, pseudo)
        assert orb.residual < 1e-10
        assert periodic.cycle_residual(horseshoe, orb.points) < 1e-9
        ref = orb.as_periodic(horseshoe)
        assert ref.is_saddle
        assert cmath.exp(orb.lambda_u_log) == pytest.approx(ref.lambda_u, rel=1e-8)
        # determinant identity in log space
        jac_log = orb.period * cmath.log(horseshoe.jacobian)
        assert cmath.exp(orb.lambda_u_log + orb.lambda_s_log - jac_log) == pytest.approx(1.0, abs=1e-12)
        assert orb.mid_distance < pseudo.closing_gap * 10


def test_log_multipliers_on_census_orbits(horseshoe_orbits, horseshoe):
    for o in horseshoe_orbits[6]:
        lu, ls = shadowing.log_multipliers(horseshoe, o.points)
        assert cmath.exp(lu) == pytest.approx(o.lambda_u, rel=1e-9)
        assert cmath.exp(ls) == pytest.approx(o.lambda_s, rel=1e-6)


def test_table_rows_and_successive_ratio(table, right_saddle):
    assert not table.partial and not table.failures
    ns = [r.n for r in table.rows]
    assert ns == list(range(ns[0], ns[0] + len(ns)))
    assert max(table.succ_ratio_errors()[-5:]) < 1e-10
    assert table.spread < 1e-10
    assert table.rows[-1].succ_ratio is None


def test_distance_rate_below_contraction(table):
    rate = table.distance_rate()
    assert rate is not None
    assert rate <= table.theta() + 0.1


def test_nu0_parity_classes_differ_by_multiplier(table, right_saddle):
    even, _ = shadowing.estimate_nu0(table, parity=0)
    odd, _ = shadowing.estimate_nu0(table, parity=1)
    assert even / odd == pytest.approx(right_saddle.lambda_u, rel=1e-8)
    # the limit is c' times lambda^k
    assert even == pytest.approx(table.c_prime * right_saddle.lambda_u ** table.homoclinic.landing, rel=1e-8)


def test_nu0_shifts_with_landing(horseshoe, right_saddle, h0, table):
    ch = manifolds._Charts(horseshoe, right_saddle)
    # the same orbit named one fundamental domain later lands one step earlier
    shifted = manifolds.HomoclinicPoint(right_saddle, h0.zeta * right_saddle.lambda_u, h0.eta,
                                        h0.landing - 1, h0.transversality, h0.point)
    other = shadowing.multiplier_asymptotics(horseshoe, right_saddle, shifted, range(4, 16))
    nu, _ = shadowing.estimate_nu0(table)
    nu_s, _ = shadowing.estimate_nu0(other)
    assert nu_s == pytest.approx(nu / right_saddle.lambda_u, rel=1e-8)
    assert other.c_prime == pytest.approx(table.c_prime, rel=1e-8)
    assert ch.unstable.multiplier == right_saddle.lambda_u


def test_estimate_needs_rows(horseshoe, right_saddle, h0):
    small = shadowing.multiplier_asymptotics(horseshoe, right_saddle, h0, range(3, 5))
    with pytest.raises(ValueError):
        shadowing.estimate_nu0(small)


def test_precision_budget(right_saddle):
    limit = 120 * math.log(2) / math.log(abs(right_saddle.lambda_u))
    assert not shadowing.precision_budget(right_saddle, math.floor(limit))
    assert shadowing.precision_budget(right_saddle, math.ceil(limit) + 1)


def test_csv_and_summary(table):
    lines = table.to_csv().splitlines()
    assert lines[0] == ",".join(shadowing.AsymptoticsTable.HEADER)
    assert len(lines) == len(table.rows) + 1
    summ = table.summary()
    assert summ["nu0"] is not None and summ["failures"] == []


def test_successive_ratio_converges_in_the_complex_sense(table, right_saddle):
    lam = right_saddle.lambda_u
    errs = [abs(r.succ_ratio - lam) / abs(lam) for r in table.rows if r.succ_ratio is not None]
    # geometric decrease until the rounding floor, then flat within a 10% band of that floor
    above = [e for e in errs if e > 1e-13]
    assert len(above) >= 5
    assert all(b < a for a, b in zip(above, above[1:]))
    floor = max(errs[-3:])
    assert floor < 1e-13
    assert all(e <= 1.1 * floor for e in errs[-3:])
