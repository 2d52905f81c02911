import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcflab import curve2d
from mcflab.curve2d import (
    ClosedCurve2D,
    build_homotopy,
    c1_distance_to_unit_circle,
    center_of_mass,
    circle_curve,
    csf_step,
    curvature,
    ellipse_curve,
    enclosed_area,
    noncollapsedness_ratio,
    rotate,
    scale,
    smooth_step,
    translate,
    unit_circle,
)


# ---------------------------------------------------------------- invariants


def test_rejects_too_few_vertices():
    t = np.arange(8) / 8
    pts = np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)])
    with pytest.raises(ValueError, match="vertices"):
        ClosedCurve2D(pts)


def test_rejects_degenerate_edge():
    pts = unit_circle(64).points.copy()
    pts[3] = pts[4]
    with pytest.raises(ValueError, match="degenerate edge"):
        ClosedCurve2D(pts)


def test_self_intersection_helper_detects_bowtie():
    bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert curve2d._polyline_self_intersects(bowtie)
    assert not curve2d._polyline_self_intersects(square)


def test_rejects_nonembedded_curve():
    t = np.arange(64) / 64
    ang = 2 * np.pi * t
    # limacon with an inner loop: radius changes sign, total turning 4*pi
    r = 0.35 + np.cos(ang)
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    with pytest.raises(ValueError):
        ClosedCurve2D(pts)


def test_rejects_clockwise_orientation():
    pts = unit_circle(64).points[::-1].copy()
    with pytest.raises(ValueError, match="turning"):
        ClosedCurve2D(pts)


def test_points_are_immutable():
    c = unit_circle(64)
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0


# ---------------------------------------------------------------- curvature


def test_curvature_unit_circle():
    c = unit_circle(256)
    k = curvature(c)
    assert np.all(np.abs(k - 1.0) <= 1e-3)


def test_curvature_radius_two_circle():
    c = circle_curve(2.0, n=256)
    k = curvature(c)
    assert np.allclose(k, 0.5, atol=1e-3)


def test_curvature_ellipse_closed_form():
    # oracle: kappa(theta) = a*b / (a^2 sin^2 + b^2 cos^2)^(3/2) at theta=0 is a/b^2
    a, b = 2.0, 1.0
    expected = a / b**2
    c = ellipse_curve(a, b, n=256)
    k = curvature(c)
    assert abs(k[0] - expected) <= 0.02 * expected


# ----------------------------------------------------------- center of mass


def test_center_of_mass_unit_circle():
    com = center_of_mass(unit_circle(128))
    assert np.allclose(com, 0.0, atol=1e-12)


def test_center_of_mass_translation_equivariance():
    c = circle_curve(1.0, center=(3.0, -1.0), n=128)
    assert np.allclose(center_of_mass(c), [3.0, -1.0], atol=1e-12)


def test_center_of_mass_ellipse():
    c = ellipse_curve(2.0, 1.0, center=(1.0, 1.0), n=128)
    assert np.allclose(center_of_mass(c), [1.0, 1.0], atol=1e-12)


def test_recenter_to_machine_precision():
    c = ellipse_curve(1.5, 1.0, center=(0.7, -0.3), n=128)
    rec = translate(c, -center_of_mass(c))
    assert np.all(np.abs(center_of_mass(rec)) <= 1e-12)


# ------------------------------------------------------- noncollapsedness


def brute_force_inscribed_ratio(curve: ClosedCurve2D) -> float:
    """Independent oracle: bisection for the largest inscribed disk touching
    at each vertex, checked against all other vertices."""
    p = curve.points
    k = curvature(curve)
    n_in = curve2d.inward_normals(curve)
    worst = np.inf
    for i in range(curve.n):
        lo, hi = 0.0, 10.0 * float(np.max(np.abs(p))) + 10.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            c = p[i] + mid * n_in[i]
            if np.min(np.linalg.norm(p - c, axis=1)) >= mid * (1 - 1e-12):
                lo = mid
            else:
                hi = mid
        worst = min(worst, k[i] * lo)
    return float(worst)


def test_noncollapsedness_unit_circle():
    assert abs(noncollapsedness_ratio(unit_circle(128)) - 1.0) <= 1e-3


def test_noncollapsedness_scale_invariant_circle():
    assert abs(noncollapsedness_ratio(circle_curve(5.0, n=128)) - 1.0) <= 1e-9


def test_noncollapsedness_ellipse_vs_bruteforce():
    c = ellipse_curve(1.1, 1.0, n=96)
    val = noncollapsedness_ratio(c)
    oracle = brute_force_inscribed_ratio(c)
    assert 0.0 < val < 1.0
    assert abs(val - oracle) <= 1e-6


def test_noncollapsedness_rejects_nonconvex():
    t = np.arange(128) / 128
    ang = 2 * np.pi * t
    r = 1.0 + 0.2 * np.cos(5 * ang)
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    with pytest.raises(ValueError, match="nonconvex"):
        noncollapsedness_ratio(ClosedCurve2D(pts))


@settings(max_examples=25, deadline=None)
@given(
    angle=st.floats(-math.pi, math.pi),
    tx=st.floats(-5, 5),
    ty=st.floats(-5, 5),
    factor=st.floats(0.2, 5.0),
)
def test_noncollapsedness_rigid_motion_and_scale_invariant(angle, tx, ty, factor):
    base = ellipse_curve(1.2, 1.0, n=64)
    ref = noncollapsedness_ratio(base)
    moved = scale(rotate(translate(base, (tx, ty)), angle, center=(tx, ty)), factor,
                  center=(tx, ty))
    assert abs(noncollapsedness_ratio(moved) - ref) <= 1e-9


# ------------------------------------------------------------- C1 distance


def test_c1_distance_exact_circle():
    assert c1_distance_to_unit_circle(unit_circle(256)) <= 1e-10


def test_c1_distance_dilated_circle():
    d = c1_distance_to_unit_circle(circle_curve(1.01, n=256))
    assert abs(d - 0.01) <= 1e-4


def test_c1_distance_rotation_insensitive():
    c = rotate(unit_circle(256), 0.7)
    assert c1_distance_to_unit_circle(c) <= 1e-8


def test_c1_distance_radial_mode_bounds():
    # oracle: dense sup search at doubled resolution over the same family
    n = 512
    t = np.arange(n) / n
    ang = 2 * np.pi * t
    r = 1.0 + 0.005 * np.cos(3 * ang)
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    d = c1_distance_to_unit_circle(ClosedCurve2D(pts))
    assert 0.005 <= d <= 0.03


# ---------------------------------------------------------------- CSF step


def test_csf_circle_one_step_matches_exact_solution():
    r0 = 1.0
    dt = 1e-4
    c = circle_curve(r0, n=256)
    stepped = csf_step(c, dt)
    radii = np.linalg.norm(stepped.points, axis=1)
    exact = math.sqrt(r0**2 - 2 * dt)
    assert np.all(np.abs(radii - exact) <= 1e-7)


def test_csf_circle_tracks_exact_solution_to_half_radius():
    # dt = 1e-4 * r0^2 nominally, capped by the CFL bound as edges shrink
    r0 = 1.0
    n = 256
    c = circle_curve(r0, n=n)
    t = 0.0
    max_rel = 0.0
    while True:
        exact = math.sqrt(r0**2 - 2 * t)
        mean_r = float(np.mean(np.linalg.norm(c.points, axis=1)))
        max_rel = max(max_rel, abs(mean_r - exact) / exact)
        if exact <= r0 / 2:
            break
        dt = min(1e-4 * r0**2, 0.2 * float(np.min(c.edge_lengths)) ** 2)
        c = csf_step(c, dt)
        t += dt
    assert max_rel <= 1e-3


def test_csf_ellipse_isoperimetric_ratio_decreases():
    c = ellipse_curve(2.0, 1.0, n=256)
    ratios = []
    for _ in range(40):
        ratio = c.total_length**2 / (4 * math.pi * enclosed_area(c))
        ratios.append(ratio)
        c = csf_step(c, 0.2 * float(np.min(c.edge_lengths)) ** 2)
    diffs = np.diff(ratios)
    assert np.all(diffs < 0.0)


def test_csf_zero_step_identity():
    c = unit_circle(64)
    stepped = csf_step(c, 0.0)
    assert np.array_equal(stepped.points, c.points)


def test_csf_rejects_large_timestep():
    c = unit_circle(64)
    with pytest.raises(ValueError, match="timestep too large"):
        csf_step(c, 1.0)


def test_csf_redistribution_preserves_circle():
    c = circle_curve(1.0, n=128)
    stepped = csf_step(c, 1e-5, redistribute=True)
    radii = np.linalg.norm(stepped.points, axis=1)
    assert np.all(np.abs(radii - math.sqrt(1 - 2e-5)) <= 1e-8)


# ---------------------------------------------------------------- smooth step


def test_smooth_step_plateaus_and_symmetry():
    assert smooth_step(-1.0) == 0.0
    assert smooth_step(0.0) == 0.0
    assert smooth_step(1.0) == 1.0
    assert smooth_step(2.0) == 1.0
    assert abs(smooth_step(0.5) - 0.5) <= 1e-15
    x = np.linspace(0.05, 0.95, 91)
    vals = smooth_step(x)
    assert np.all(np.diff(vals) > 0)
    assert np.allclose(vals + smooth_step(1 - x), 1.0, atol=1e-14)


# ---------------------------------------------------------------- homotopy


def test_homotopy_exact_circle_input():
    c = unit_circle(128)
    h = build_homotopy(c, delta_hat=0.05)
    for r, sl in zip(h.r_grid, h.curves):
        if r <= 0.25:
            assert sl.points is c.points or np.array_equal(sl.points, c.points)
        if r >= 0.5:
            assert np.array_equal(sl.points, unit_circle(128).points)
    assert h.omega <= 1e-8


def test_homotopy_dilated_circle_endpoints_and_omega():
    # measured constant: omega is about 103 * delta_hat for pure dilations,
    # dominated by the second r-derivative of the blending ramp
    for delta in (0.02, 0.005):
        c = circle_curve(1.0 + delta / 2, n=128)
        h = build_homotopy(c, delta_hat=delta)
        assert np.array_equal(h.curves[0].points, c.points)
        assert np.array_equal(h.curves[-1].points, unit_circle(128).points)
        assert h.omega <= 150.0 * delta


def test_homotopy_slices_stay_noncollapsed():
    rng = np.random.default_rng(7)
    n = 128
    ang = 2 * np.pi * np.arange(n) / n
    r = 1.0 + 0.004 * np.cos(2 * ang + rng.uniform(0, 2 * np.pi)) + 0.003 * np.cos(
        3 * ang + rng.uniform(0, 2 * np.pi)
    )
    curve = ClosedCurve2D(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
    delta = 0.05
    h = build_homotopy(curve, delta_hat=delta)
    floor = 1.0 / (1.0 + delta) - 1e-6
    for sl in h.curves:
        assert noncollapsedness_ratio(sl) >= floor


def test_homotopy_rejects_far_input():
    c = circle_curve(1.5, n=128)
    with pytest.raises(ValueError, match="not delta_hat-close"):
        build_homotopy(c, delta_hat=0.01)


def test_homotopy_at_interpolates_and_plateaus():
    c = circle_curve(1.005, n=64)
    h = build_homotopy(c, delta_hat=0.02)
    assert h.at(0.1).points is h.curves[0].points
    assert h.at(0.9).points is h.curves[-1].points
    mid = h.at(0.37)
    assert mid.n == 64


# ---------------------------------------------------------------- round trip


def test_json_round_trip_revalidates():
    c = ellipse_curve(1.2, 1.0, n=64)
    data = curve2d.curve_to_json(c)
    back = curve2d.curve_from_json(data)
    assert np.array_equal(back.points, c.points)
    bad = np.asarray(data)
    bad[3] = bad[4]
    with pytest.raises(ValueError):
        curve2d.curve_from_json(bad)
