import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab import core, periodic, potential


def brute_green(fmap, x, n=60):
    """High-precision ``2^-n log max(|z_n|, |w_n|, 1)`` by plain iteration."""
    with mpmath.workdps(60):
        z, w = mpmath.mpc(x[0]), mpmath.mpc(x[1])
        f = fmap.factors[0]
        for _ in range(n):
            z, w = f.a * w + z ** 2 + f.coeffs[0], z
            if abs(z) > mpmath.mpf(10) ** 1000:
                return None
        return float(mpmath.log(max(abs(z), abs(w), 1)) / mpmath.mpf(2) ** n)


def escaping_points(fmap, rng, count, radius=3.0):
    pts = core.random_bidisk(rng, 8 * count, radius)
    g, _, status = potential.green_field(fmap, pts)
    keep = (status == 0) & (g > 1e-3)
    return pts[keep][:count]


def test_green_agrees_with_brute_force(horseshoe, rng):
    pts = escaping_points(horseshoe, rng, 20, 4.0)
    for x in pts:
        ref = brute_green(horseshoe, x)
        if ref is None:
            continue
        assert potential.green_plus(horseshoe, x).value == pytest.approx(ref, rel=1e-7, abs=1e-9)


def test_green_invariance(near_solenoid, rng):
    tol = 1e-8
    pts = escaping_points(near_solenoid, rng, 300)
    g0, _, _ = potential.green_field(near_solenoid, pts, tol)
    g1, _, _ = potential.green_field(near_solenoid, core._forward(near_solenoid, pts), tol)
    assert np.all(np.abs(g1 - 2 * g0) <= 10 * tol * np.maximum(1, g1))


def test_green_minus_invariance(horseshoe, rng):
    pts = core.random_bidisk(rng, 400, 3.0)
    g0, _, s0 = potential.green_field(horseshoe, pts, direction=-1)
    img = core._backward(horseshoe, pts)
    g1, _, _ = potential.green_field(horseshoe, img, direction=-1)
    ok = s0 == 0
    assert np.allclose(g1[ok], 2 * g0[ok], rtol=1e-7, atol=1e-7)


def test_green_vanishes_on_periodic_points(sink_saddle_map):
    # rounding drift along unstable directions leaves a residue of order tol
    for n in (1, 2, 3):
        for o in periodic.find_periodic(sink_saddle_map, n):
            for x in o.points:
                assert potential.green_plus(sink_saddle_map, x).value < 1e-7
                assert potential.green_minus(sink_saddle_map, x).value < 1e-7


def test_basin_of_sink(sink_saddle_map):
    # forward orbits near the attracting fixed point stay bounded; backward ones escape
    assert potential.green_minus(sink_saddle_map, (0.0, 0.0)).value == 0.0
    for x in [(0.05, 0.02), (-0.03j, 0.04), (0.02 + 0.02j, -0.01)]:
        assert potential.green_plus(sink_saddle_map, x).value == 0.0
        assert potential.green_minus(sink_saddle_map, x).value > 1e-4


def test_green_harmonic_mean_value(horseshoe):
    # G+ is pluriharmonic off K+: mean over a small circle in a complex line equals the center value
    center = np.array([5.0 + 1.0j, 0.3])
    tangent = np.array([0.6, 0.8j])
    th = 2 * np.pi * np.arange(256) / 256
    ring = center + 0.2 * np.exp(1j * th)[:, None] * tangent
    g, _, _ = potential.green_field(horseshoe, ring, 1e-12)
    g0 = potential.green_plus(horseshoe, center, 1e-12).value
    assert g.mean() == pytest.approx(g0, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(30.0, 1e4), th=st.floats(0, 2 * math.pi), w=st.floats(-1.0, 1.0))
def test_bottcher_functional_equation(horseshoe, r, th, w):
    x = np.array([r * complex(math.cos(th), math.sin(th)), w])
    phi = potential.bottcher_plus(horseshoe, x)
    phi_img = potential.bottcher_plus(horseshoe, core._forward(horseshoe, x))
    assert abs(phi_img - phi ** 2) <= 1e-8 * abs(phi ** 2)
    assert math.log(abs(phi)) == pytest.approx(potential.green_plus(horseshoe, x).value, rel=1e-8)


def test_bottcher_rejects_points_outside_escape_region(horseshoe):
    with pytest.raises(ValueError):
        potential.bottcher_plus(horseshoe, (0.0, 0.0))


def test_gradient_matches_finite_difference(horseshoe):
    center = np.array([4.0 + 0.5j, -1.0])
    t = np.array([1.0, 0.3j]) / np.linalg.norm([1.0, 0.3j])
    g, grad, _ = potential.green_field(horseshoe, center[None], 1e-13, tangents=t)
    h = 1e-6
    dx = (potential.green_plus(horseshoe, center + h * t, 1e-13).value
          - potential.green_plus(horseshoe, center - h * t, 1e-13).value) / (2 * h)
    dy = (potential.green_plus(horseshoe, center + 1j * h * t, 1e-13).value
          - potential.green_plus(horseshoe, center - 1j * h * t, 1e-13).value) / (2 * h)
    assert grad[0] == pytest.approx(math.hypot(dx, dy), rel=1e-5)


def test_affine_slice_through_saddle(horseshoe, right_saddle):
    disk = potential.TransversalDisk(right_saddle.points[0], (1.0, 0.0), 1.0)
    sample = potential.slice_green(horseshoe, disk, resolution=65)
    assert sample.nonharmonic
    # the stable manifold crosses the disk at its center
    assert np.min(np.abs(sample.boundary_points)) < 2 * 2.0 / 64


def test_disk_inside_sink_basin_is_harmonic(sink_saddle_map):
    disk = potential.TransversalDisk((0.0, 0.0), (0.6, 0.8), 0.05)
    sample = potential.slice_green(sink_saddle_map, disk, resolution=32)
    assert np.all(sample.green == 0.0)
    assert not sample.nonharmonic


def test_refinement_shrinks_spacing_and_keeps_points(horseshoe):
    disk = potential.TransversalDisk((0.0, 0.0), (1.0, 0.0), 4.0)
    coarse = potential.slice_green(horseshoe, disk, resolution=65)
    fine = potential.slice_green(horseshoe, disk, resolution=65, refine=4)
    assert fine.refined_spacing == pytest.approx(2 * 4.0 / 64 / 16)
    assert len(fine.boundary_points) > 0
    # refined points stay near the coarse marked set
    d = np.min(np.abs(fine.boundary_points[:, None] - coarse.zeta[coarse.marked][None]), axis=1)
    assert np.max(d) <= 2 * 4.0 / 64 * 1.5


def test_escape_time(horseshoe):
    times = potential.escape_time(horseshoe, np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 0.0]]))
    assert times[1] == 0
    assert times[0] >= 1
    assert times[2] == times[0]


def test_escape_time_bounded_point(horseshoe, right_saddle):
    assert potential.escape_time(horseshoe, right_saddle.points[:1], cap=8)[0] == -1


def test_ppm_round_trip(tmp_path, horseshoe):
    disk = potential.TransversalDisk((0.0, 0.0), (1.0, 0.0), 4.0)
    sample = potential.slice_green(horseshoe, disk, resolution=32)
    path = tmp_path / "s.ppm"
    potential.write_ppm(sample, path)
    img = potential.read_ppm(path)
    assert img.shape == (32, 32, 3)
