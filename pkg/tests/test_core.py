import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab import core

coord = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)
param = st.complex_numbers(min_magnitude=0.05, max_magnitude=2.0, allow_nan=False,
                           allow_infinity=False)


def two_factor():
    return core.ComposedAutomorphism((core.HenonFactor(0.4 - 0.2j, (-1.0 + 0.3j,)),
                                      core.HenonFactor(-0.7, (0.2j, 0.5), degree=3)))


def test_single_factor_formula():
    f = core.ComposedAutomorphism.single(0.5, -1.0)
    assert core.evaluate(f, (1.0, 2.0)) == core.C2Point(1.0 + 1.0 - 1.0, 1.0)


def test_degree_and_jacobian_multiply():
    f = two_factor()
    assert f.degree == 6
    assert f.jacobian == pytest.approx((-(0.4 - 0.2j)) * 0.7)


def test_zero_linear_coefficient_rejected():
    with pytest.raises(ValueError, match="nonzero"):
        core.HenonFactor(0.0, (1.0,))
    assert any("nonzero" in e for e in core.map_errors({"factors": [{"a": [0, 0], "coeffs": []}]}))


@settings(max_examples=60, deadline=None)
@given(a=param, c=coord, z=coord, w=coord)
def test_inverse_round_trip(a, c, z, w):
    f = core.ComposedAutomorphism.single(a, c)
    x = np.array([z, w])
    back = core.evaluate_inverse(f, core.evaluate(f, x))
    assert np.allclose(back, x, rtol=1e-9, atol=1e-9 * (1 + 1 / abs(a)) * 20)
    fwd = core.evaluate(f, core.evaluate_inverse(f, x))
    assert np.allclose(fwd, x, rtol=1e-9, atol=1e-9 * (1 + 1 / abs(a)) * 20)


def test_inverse_round_trip_composed(rng):
    f = two_factor()
    pts = core.random_bidisk(rng, 200, 1.5)
    assert np.allclose(core.evaluate_inverse(f, core.evaluate(f, pts)), pts, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(a=param, c=coord, z=coord, w=coord)
def test_derivative_matches_finite_difference(a, c, z, w):
    f = core.ComposedAutomorphism.single(a, c)
    x = np.array([z, w])
    D = core.derivative(f, x)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2, dtype=complex)
        e[j] = h
        fd = (np.asarray(core.evaluate(f, x + e)) - np.asarray(core.evaluate(f, x - e))) / (2 * h)
        scale = max(1.0, np.max(np.abs(D)))
        assert np.max(np.abs(fd - D[:, j])) <= 1e-6 * scale


def test_derivative_determinant_is_jacobian(rng):
    f = two_factor()
    pts = core.random_bidisk(rng, 50)
    dets = np.linalg.det(core.derivative(f, pts))
    assert np.allclose(dets, f.jacobian, rtol=1e-12)


def test_overflow_raises_and_iterate_reports():
    f = core.ComposedAutomorphism.single(0.5, 0.0)
    with pytest.raises(core.EscapeError):
        core.orbit(f, (10.0, 0.0), 50)
    rep = core.iterate(f, (10.0, 0.0), 50)
    assert isinstance(rep, core.EscapeReport)
    assert rep.escape_time > 1


def test_filtration_region_is_forward_invariant(rng):
    f = two_factor()
    R = core.filtration_radius(f)
    pts = core.random_bidisk(rng, 4000, 3 * R)
    inside = core.in_forward_region(pts, R)
    img = core._forward(f, pts[inside])
    assert np.all(core.in_forward_region(img, R))
    assert np.all(np.abs(img[:, 0]) > np.abs(pts[inside][:, 0]))


def test_extended_residual_is_small_on_exact_fixed_point(sink_saddle_map):
    pts = np.array([[0.5, 0.5]], dtype=complex)
    assert core.ext_forward_residual(sink_saddle_map, pts) < 1e-25
    M = core.ext_monodromy(sink_saddle_map, pts)
    assert np.allclose(np.array(M.tolist(), dtype=complex), [[1, 0.5], [1, 0]])


def test_map_dict_round_trip(tmp_path):
    f = two_factor()
    path = tmp_path / "map.toml"
    core.dump_map(f, path)
    assert core.load_map(path) == f
    assert core.map_from_dict(core.map_to_dict(f)) == f


def test_map_errors_list_every_problem():
    errs = core.map_errors({"factors": [{"a": "x", "coeffs": [[1, 0]]}, {"coeffs": 3}]})
    assert len(errs) >= 3
    assert all(e.startswith("map.factors") or e.startswith("map") for e in errs)


def test_filtration_radius_small_case():
    # R^2 - 0.5 R >= 2 R holds from R = 2.5 on
    R = core.filtration_radius(core.ComposedAutomorphism.single(0.5, 0.0))
    assert 2.5 - 1e-12 <= R <= 4.0
