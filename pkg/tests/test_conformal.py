"""Tests for the conformal layer: space curves as point-sphere curves,
tubes, curve-level Ribaucour pairs, circle congruences, and the isotropy
projection.

Oracle values come from hand geometry (parallel lines, round circles,
tori) or were frozen from a first trusted run; every frozen number is
recorded next to its assertion.
"""

from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liechannel import conformal as cf
from liechannel.core import (
    INFINITY_VEC,
    SIGNS,
    GeometryError,
    circle_phase,
    lightcone_frame,
    parallel_transform_matrix,
    plane_lift,
    projective_gap,
    span,
    sphere_lift,
)
from liechannel.legendre import curvature_data
from liechannel.mesh import grid_point_spheres
from liechannel.transforms import verify_ribaucour


def binner(a, b):
    return np.einsum("...i,...i->...", a, SIGNS * b)


@lru_cache(maxsize=None)
def lines():
    axis = cf.line_curve(n=64)
    offset = cf.line_curve(n=64, origin=(2.0, 0.0, 0.0))
    return axis, offset


def _jet_line(speed, x0):
    def jet(t):
        z = np.zeros_like(t)
        c = np.stack([np.full_like(t, x0), z, speed * t], axis=-1)
        c1 = np.stack([z, z, np.full_like(t, speed)], axis=-1)
        return c, c1, np.zeros_like(c)
    return jet


@lru_cache(maxsize=None)
def mismatch_pair():
    # same u-grid, different parametrisation speed: not Ribaucour
    u = np.linspace(0.5, 1.0, 64)
    slow = cf.conformal_curve(_jet_line(1.0, 0.0), u)
    fast = cf.conformal_curve(_jet_line(2.0, 2.0), u)
    return slow, fast


# ---------------------------------------------------------------------------
# curves and lifts
# ---------------------------------------------------------------------------

def test_line_curve_is_point_sphere_lift():
    axis, _ = lines()
    assert np.max(np.abs(axis.lift.vectors[:, 5])) == 0.0
    assert np.max(np.abs(binner(axis.lift.vectors, axis.p_vec))) == 0.0
    assert axis.lift.jet is not None
    assert axis.n == 64


def test_array_source_matches_jet_source():
    axis, _ = lines()
    sampled = cf.conformal_curve(axis.gamma.copy(), axis.u_values)
    assert np.max(np.abs(sampled.lift.vectors - axis.lift.vectors)) == 0.0
    assert sampled.lift.jet is None


def test_curve_shape_guard():
    with pytest.raises(GeometryError, match="shape"):
        cf.conformal_curve(np.zeros((5, 2)), np.linspace(0.0, 1.0, 5))


def test_spacelike_direction_rejected():
    with pytest.raises(GeometryError, match="timelike"):
        cf.line_curve(p_vec=np.eye(6)[0])


def test_legendre_lift_sphere_family_is_the_point_lift():
    axis, _ = lines()
    grid = cf.curve_legendre_lift(axis)
    data = curvature_data(grid)
    worst = max(
        projective_gap(data.s1[i, j], axis.lift.vectors[i])
        for i in range(0, 64, 8) for j in range(0, grid.sigma.shape[1], 8))
    assert worst <= 1e-12                      # measured 3.3e-16
    assert np.array_equal(grid.metadata["p_vec"], axis.p_vec)


def test_line_lift_transverse_family_is_planes_through_axis():
    axis, _ = lines()
    data = curvature_data(cf.curve_legendre_lift(axis))
    s2 = data.s2 / np.linalg.norm(data.s2, axis=-1, keepdims=True)
    # plane lifts: no finite part, and the plane contains the z-axis
    assert np.max(np.abs(s2[..., 3] + s2[..., 4])) <= 1e-12  # 7.8e-15
    assert np.max(np.abs(np.abs(s2[..., 5]) - np.sqrt(0.5))) <= 1e-12
    assert np.max(np.abs(s2[..., 2])) <= 1e-12               # 7.6e-15


# ---------------------------------------------------------------------------
# tubes
# ---------------------------------------------------------------------------

def test_tube_zero_radius_rejected():
    axis, _ = lines()
    with pytest.raises(ValueError, match="nonzero"):
        cf.tube(axis, 0.0)


def test_unit_tube_point_spheres_sit_on_the_cylinder():
    axis, _ = lines()
    grid = cf.tube(axis, 1.0)
    positions, finite = grid_point_spheres(grid.sigma, grid.tau)
    assert finite.all()
    dist = np.hypot(positions[..., 0], positions[..., 1])
    assert np.max(np.abs(dist - 1.0)) <= 1e-12  # measured 5.6e-16
    assert grid.metadata["validation"].passed
    assert grid.metadata["point_immersion"] >= 0.99
    assert "regularity_note" not in grid.metadata


def test_tube_sphere_curve_matches_grid_and_transports_jets():
    axis, _ = lines()
    curve = cf.tube_sphere_curve(axis, 1.0)
    m = parallel_transform_matrix(1.0)
    assert np.max(np.abs(curve.vectors - axis.lift.vectors @ m.T)) == 0.0
    d1, d2 = curve.derivatives()
    b1, b2 = axis.lift.derivatives()
    assert np.max(np.abs(d1 - b1 @ m.T)) == 0.0
    assert np.max(np.abs(d2 - b2 @ m.T)) == 0.0
    # parallel transformations compose additively
    two_step = (cf.tube_sphere_curve(axis, 0.7).vectors
                @ parallel_transform_matrix(0.3).T)
    assert np.max(np.abs(two_step - curve.vectors)) <= 1e-14  # 2.2e-16


def test_circle_tube_is_a_torus():
    ring = cf.circle_curve(n=96, radius=2.0)
    grid = cf.tube(ring, 1.0)
    positions, finite = grid_point_spheres(grid.sigma, grid.tau)
    assert finite.all()
    residual = ((np.hypot(positions[..., 0], positions[..., 1]) - 2.0) ** 2
                + positions[..., 2] ** 2 - 1.0)
    assert np.max(np.abs(residual)) <= 1e-12   # measured 9.5e-15


def test_pinched_tube_reports_point_degeneracy():
    ring = cf.circle_curve(n=96, radius=2.0)

    healthy = cf.tube(ring, 1.0)
    assert healthy.metadata["point_immersion"] >= 0.99   # measured 0.9984
    assert "regularity_note" not in healthy.metadata

    close = cf.tube(ring, 1.99)
    assert close.metadata["point_immersion"] <= 2e-2     # measured 9.99e-3
    assert "regularity_note" not in close.metadata

    pinched = cf.tube(ring, 2.0)
    assert pinched.metadata["point_immersion"] <= 1e-12  # measured 3.2e-16
    assert "point projection degenerates" in pinched.metadata["regularity_note"]
    # the contact lift itself stays immersed; only the Euclidean reading pinches
    assert pinched.metadata["validation"].passed


# ---------------------------------------------------------------------------
# Ribaucour pairs of curves
# ---------------------------------------------------------------------------

def test_parallel_lines_are_ribaucour_at_every_level():
    axis, offset = lines()
    point_level = cf.ribaucour_curve_check(axis, offset)
    assert point_level <= 1e-12                 # measured 1.3e-15
    for radius in (0.3, 1.0):
        tube_level = verify_ribaucour(cf.tube_sphere_curve(axis, radius),
                                      cf.tube_sphere_curve(offset, radius))
        assert tube_level <= 1e-12
        assert abs(tube_level - point_level) <= 1e-8  # measured 1.6e-16


def test_speed_mismatch_detected_at_every_level():
    slow, fast = mismatch_pair()
    assert cf.ribaucour_curve_check(slow, fast) >= 1e-2   # measured 0.533
    for radius in (0.3, 1.0):
        tube_level = verify_ribaucour(cf.tube_sphere_curve(slow, radius),
                                      cf.tube_sphere_curve(fast, radius))
        assert tube_level >= 1e-2               # measured 0.521 / 0.459


def test_touching_curves_rejected():
    axis, _ = lines()
    with pytest.raises(GeometryError, match="touch at sample"):
        cf.ribaucour_curve_check(axis, cf.line_curve(n=64))


def test_grid_mismatch_rejected():
    axis, _ = lines()
    other = cf.line_curve(n=32, origin=(2.0, 0.0, 0.0))
    with pytest.raises(GeometryError, match="share their u-grid"):
        cf.ribaucour_curve_check(axis, other)


# ---------------------------------------------------------------------------
# circle congruence
# ---------------------------------------------------------------------------

def test_circle_congruence_hand_geometry():
    # two parallel lines, distance 2: the enveloped circle at u sits in the
    # plane y = 0 with centre (1, 0, u) and radius 1
    axis, offset = lines()
    points = cf.circle_congruence(axis, offset, 32,
                                  np.linspace(0.0, 2.0 * np.pi, 17))
    centre = np.array([1.0, 0.0, axis.u_values[32]])
    radius = np.linalg.norm(points - centre, axis=-1)
    assert np.max(np.abs(radius - 1.0)) <= 1e-12   # measured 1.4e-15
    assert np.max(np.abs(points[:, 1])) <= 1e-12


def test_circle_congruence_report_parallel_lines():
    axis, offset = lines()
    report = cf.circle_congruence_report(axis, offset)
    assert report.membership <= 1e-8               # measured 1.3e-15
    assert max(report.tangency1, report.tangency2) <= 1e-4  # 7.5e-7 rad
    assert np.max(report.residuals) <= 1e-12
    assert report.passed
    assert report.notes == []


def test_circle_congruence_rejects_non_ribaucour_pair():
    slow, fast = mismatch_pair()
    with pytest.raises(GeometryError, match="not a Ribaucour pair"):
        cf.circle_congruence(slow, fast, 5, [0.0])


def test_collinear_pair_envelopes_a_straight_line():
    # the same line traversed with an offset parameter: a valid Ribaucour
    # pair whose "circle" is the axis itself, passing through infinity
    axis, _ = lines()
    shifted = cf.line_curve(n=64, origin=(0.0, 0.0, 5.0))
    assert cf.ribaucour_curve_check(axis, shifted) <= 1e-12  # 5.6e-15

    d1, _ = axis.lift.derivatives()
    sub = span([axis.lift.vectors[10], d1[10], shifted.lift.vectors[10]])
    assert sub.containment_gap(INFINITY_VEC) <= 1e-12        # 3.7e-16
    phase = circle_phase(lightcone_frame(sub), INFINITY_VEC)
    with pytest.raises(GeometryError, match="infinity"):
        cf.circle_congruence(axis, shifted, 10, [phase])
    # away from the infinite phase the samples land on the axis
    points = cf.circle_congruence(axis, shifted, 10,
                                  [phase + 0.5, phase + 2.0])
    assert np.max(np.abs(points[:, :2])) <= 1e-12            # 6.9e-16


# ---------------------------------------------------------------------------
# symmetry breaking with a tilted direction
# ---------------------------------------------------------------------------

def test_tilted_direction_builds_genuine_spheres():
    p = np.array([0.0, 0.0, 0.0, 0.0, 0.6, 0.8])   # (p, p) = -0.28
    curve = cf.line_curve(n=64, p_vec=p)
    v = curve.lift.vectors
    radii = v[:, 5] / (v[:, 3] + v[:, 4])
    # closed form: r(u) = (0.8 - sqrt(1 + 0.36 u^2)) / 0.6
    expected = (0.8 - np.sqrt(1.0 + 0.36 * curve.u_values ** 2)) / 0.6
    assert np.max(np.abs(radii - expected)) <= 1e-12
    assert np.max(np.abs(binner(v, p))) <= 1e-12   # measured 4.4e-16

    ring = cf.circle_curve(n=64, radius=2.0, p_vec=p)
    grid = cf.curve_legendre_lift(ring)
    assert grid.metadata["validation"].passed
    data = curvature_data(grid)
    s1 = data.s1 / np.linalg.norm(data.s1, axis=-1, keepdims=True)
    assert np.max(np.abs(binner(s1, p))) <= 1e-12  # measured 2.8e-16


# ---------------------------------------------------------------------------
# isotropy projection
# ---------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(
    cx=st.floats(-5.0, 5.0), cy=st.floats(-5.0, 5.0), cz=st.floats(-5.0, 5.0),
    r=st.floats(0.1, 4.0), sign=st.sampled_from([-1.0, 1.0]),
    scale=st.floats(0.2, 5.0),
)
def test_isotropy_roundtrip(cx, cy, cz, r, sign, scale):
    c = np.array([cx, cy, cz])
    q = cf.isotropy_projection(scale * sphere_lift(c, sign * r))
    assert np.max(np.abs(q.c - c)) <= 1e-12   # worst over 1000 draws: 2.1e-14
    assert abs(q.r - sign * r) <= 1e-12
    assert np.max(np.abs(cf.isotropy_lift(q) - sphere_lift(c, sign * r))) <= 1e-11


def test_isotropy_rejects_planes_and_infinity():
    with pytest.raises(GeometryError, match="not a finite point"):
        cf.isotropy_projection(plane_lift((0.0, 0.0, 1.0), 0.5))
    with pytest.raises(GeometryError, match="not a finite point"):
        cf.isotropy_projection(INFINITY_VEC)
