import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab import core, ergodic, periodic


def test_phi0_average_equals_orbit_exponent(horseshoe, horseshoe_orbits):
    for n in (1, 3, 6):
        sp = ergodic.birkhoff_spectrum(horseshoe, n, horseshoe_orbits[n])
        saddles = [o for o in horseshoe_orbits[n] if o.is_saddle]
        chi = np.array([o.chi_u for o in saddles])
        assert np.allclose(sp.values[:, 0], chi, atol=1e-8)


def test_birkhoff_on_cycle_equals_exponent(horseshoe, horseshoe_orbits):
    for o in horseshoe_orbits[5]:
        est = ergodic.lyapunov_birkhoff(horseshoe, o, 10 * o.period)
        assert est.value == pytest.approx(o.chi_u, abs=1e-10)
        M = o.monodromy
        v = ergodic.unstable_direction(horseshoe, o)
        assert np.allclose(M @ v, o.lambda_u * v, atol=1e-8 * abs(o.lambda_u))


def test_saddle_average_on_fixed_points(sink_saddle_map):
    # one saddle with chi = log((1 + sqrt 3) / 2) among d = 2 fixed points
    est = ergodic.lyapunov_saddle_average(sink_saddle_map, 1)
    chi = math.log((1 + math.sqrt(3)) / 2)
    assert est.value == pytest.approx(chi / 2, abs=1e-12)
    assert est.count_normalized == pytest.approx(chi, abs=1e-12)


def test_saddle_average_matches_census(horseshoe, horseshoe_orbits):
    rows = [periodic.census_row(horseshoe, horseshoe_orbits[n], n) for n in range(1, 9)]
    est = ergodic.lyapunov_saddle_average(horseshoe, 8, rows)
    assert est.value == pytest.approx(rows[-1].weighted_chi_u)
    assert est.uncertainty == pytest.approx(abs(rows[-1].weighted_chi_u - rows[-2].weighted_chi_u))
    # entropy bound: the exponent of the measure of maximal entropy is at least log d
    assert est.value >= math.log(2)


def test_birkhoff_escape_is_reported(horseshoe):
    with pytest.raises(ergodic.BirkhoffEscape) as info:
        ergodic.lyapunov_birkhoff(horseshoe, (10.0, 0.0), 200)
    assert info.value.partial_length >= 1


@settings(max_examples=40, deadline=None)
@given(rho=st.floats(0.01, 2.0), extra=st.floats(0.0, 1.0), j=st.integers(0, 5))
def test_mask_monotone_in_radius(rho, extra, j):
    dev = np.abs(np.random.default_rng(5).normal(size=(64, 6)))
    tight = ergodic.sper_plus_mask(dev, rho, j)
    loose = ergodic.sper_plus_mask(dev, rho + extra, j)
    fewer = ergodic.sper_plus_mask(dev, rho, max(j - 1, 0))
    assert np.all(loose[tight])
    assert np.all(fewer[tight])


def test_spectra_share_reference(horseshoe, horseshoe_orbits):
    sp = ergodic.birkhoff_spectra(horseshoe, range(2, 9), horseshoe_orbits)
    ref = sp[8].reference
    for n, s in sp.items():
        assert np.array_equal(s.reference, ref)
        assert s.mask_ratio <= 1.0
        assert s.names[0] == ergodic.PHI0
    js = [sp[n].j_n for n in range(2, 9)]
    assert all(b <= a + 1 for a, b in zip(js, js[1:]))
    ratios = [sp[n].mask_ratio for n in range(2, 9)]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))


def test_spectrum_csv(horseshoe, horseshoe_orbits):
    sp = ergodic.birkhoff_spectrum(horseshoe, 3, horseshoe_orbits[3])
    lines = sp.to_csv().splitlines()
    assert lines[0].split(",")[:4] == ["orbit", "period", "in_sper_plus", ergodic.PHI0]
    assert len(lines) == 1 + len(sp.orbit_ids)
    with pytest.raises(ValueError):
        ergodic.birkhoff_spectrum(horseshoe, 3, horseshoe_orbits[3], test_functions=("nope",))


def test_gap_report_horseshoe(horseshoe, horseshoe_orbits):
    rows = [periodic.census_row(horseshoe, horseshoe_orbits[n], n) for n in range(1, 7)]
    rep = ergodic.lyapunov_gap_report(horseshoe, 6, rows)
    assert rep["gap_81"] and rep["gap_82"]
    assert rep["chi_min"] <= rep["chi_mu"] <= rep["chi_max"]
    assert json.loads(ergodic.gap_report_json(rep))["saddle_count"] == rep["saddle_count"]


def test_gap_report_single_saddle(sink_saddle_map):
    rep = ergodic.lyapunov_gap_report(sink_saddle_map, 1)
    assert rep["saddle_count"] == 1
    assert not rep["gap_81"]
    assert rep["chi_min"] == rep["chi_max"]


def test_gap_report_without_saddles(sink_saddle_map):
    sinks = [o for o in periodic.find_periodic(sink_saddle_map, 1) if not o.is_saddle]
    with pytest.raises(ValueError):
        ergodic.lyapunov_gap_report(sink_saddle_map, 1,
                                    [periodic.census_row(sink_saddle_map, sinks, 1)])
