"""Envelope construction, the middle one-form, and conserved quantities."""

from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liechannel import channel as ch
from liechannel.core import (
    SIGNS,
    GeometryError,
    inner,
    projective_gap,
    sphere_lift,
)
from liechannel.legendre import curvature_data, is_channel
from liechannel.mesh import grid_point_spheres

E6 = np.eye(6)[5]


def binner(a, b):
    return np.einsum("...i,...i->...", a, SIGNS * b)


@lru_cache(maxsize=None)
def cylinder_envelope(n=64):
    curve = ch.line_sphere_curve(n, -1.0, 1.0, radius=1.0)
    return curve, ch.envelope(curve, n)


@lru_cache(maxsize=None)
def torus_envelope(n=64):
    curve = ch.circle_sphere_curve(n, ring_radius=2.0, radius=1.0)
    return curve, ch.envelope(curve, n)


@lru_cache(maxsize=None)
def cylinder_omega(n=64):
    curve, grid = cylinder_envelope(n)
    sigma1 = ch.special_lift(curve, "against_p", E6)
    return ch.omega0_form(grid, sigma1)


# ---------------------------------------------------------------------------
# sphere curves
# ---------------------------------------------------------------------------

def test_curve_presets_are_null_and_regular():
    for curve in (ch.line_sphere_curve(32), ch.circle_sphere_curve(32),
                  ch.helix_sphere_curve(32), ch.line_sphere_curve(32, radius=0.0)):
        curve.check()
        assert curve.nullity() <= 1e-12


def test_jet_matches_finite_differences():
    curve = ch.helix_sphere_curve(96, radius=0.6)
    d1_jet, d2_jet = curve.derivatives()
    fd = ch.SphereCurve(curve.vectors, curve.u_values)
    d1_fd, d2_fd = fd.derivatives()
    # interior rows only: the open ends drop to order two
    assert np.max(np.abs(d1_jet - d1_fd)[3:-3]) < 1e-5
    assert np.max(np.abs(d2_jet - d2_fd)[3:-3]) < 1e-4


def test_concentric_spheres_are_rejected():
    # growing radius, fixed centre: the quotient speed is negative
    def center(u):
        z = np.zeros(np.shape(u) + (3,))
        return z, z.copy(), z.copy()

    def rad(u):
        u = np.asarray(u, dtype=float)
        return u, np.ones_like(u), np.zeros_like(u)

    curve = ch.curve_from_profile(center, rad, np.linspace(1.0, 2.0, 32))
    with pytest.raises(GeometryError, match="not regular"):
        curve.check()


def test_non_null_samples_are_rejected():
    curve = ch.SphereCurve(np.ones((32, 6)), np.linspace(0.0, 1.0, 32))
    with pytest.raises(GeometryError, match="not null"):
        curve.check()


def test_curve_shape_guards():
    with pytest.raises(GeometryError):
        ch.SphereCurve(np.zeros((32, 5)), np.linspace(0, 1, 32))
    with pytest.raises(GeometryError):
        ch.SphereCurve(np.zeros((4, 6)), np.linspace(0, 1, 4))


# ---------------------------------------------------------------------------
# the envelope as a Legendre grid
# ---------------------------------------------------------------------------

def test_cylinder_envelope_point_spheres_sit_on_the_cylinder():
    curve, grid = cylinder_envelope()
    positions, finite = grid_point_spheres(grid.sigma, grid.tau)
    assert finite.all()
    dist = np.hypot(positions[..., 0], positions[..., 1])
    assert np.max(np.abs(dist - 1.0)) <= 1e-12
    # z is the curve parameter and each u-row sweeps a uniform circle
    assert np.max(np.abs(positions[..., 2] - grid.u_values[:, None])) <= 1e-12
    ang = np.sort(np.arctan2(positions[7, :, 1], positions[7, :, 0]))
    gaps = np.diff(ang)
    assert np.max(gaps) - np.min(gaps) <= 1e-12


def test_cylinder_envelope_validates():
    _, grid = cylinder_envelope()
    report = grid.metadata["validation"]
    assert report.passed
    assert report.isotropy <= 1e-12
    assert report.contact <= 1e-3          # measured 1.47e-4 at 64x64
    assert 0.3 <= report.immersion <= 0.7  # measured 0.499


def test_envelope_elements_contain_the_curve():
    curve, grid = cylinder_envelope()
    # the enveloped sphere is the sigma frame itself; check the pairing with
    # tau as well so membership is in the contact element, not just the line
    gap = projective_gap(grid.sigma, curve.vectors[:, None, :])
    assert np.max(gap) <= 1e-14
    s = grid.sigma / np.linalg.norm(grid.sigma, axis=-1, keepdims=True)
    t = grid.tau / np.linalg.norm(grid.tau, axis=-1, keepdims=True)
    assert np.max(np.abs(binner(s, t))) <= 1e-12


def test_envelope_s1_is_the_enveloped_sphere_and_dir1_circular():
    curve, grid = cylinder_envelope()
    data = curvature_data(grid)
    gap = projective_gap(data.s1, curve.vectors[:, None, :])
    assert np.max(gap) <= 1e-10            # measured 3.5e-16
    report = is_channel(grid, data)
    assert report.circular("dir1")
    assert report.consistent


def test_cylinder_envelope_is_channel_both_ways():
    # tangent planes are constant along the rulings, so the second family
    # is circular too
    _, grid = cylinder_envelope()
    assert is_channel(grid).circular_dir == "both"


def test_contact_residual_quarters_when_steps_halve():
    _, coarse = cylinder_envelope(64)
    _, fine = cylinder_envelope(128)
    ratio = (coarse.metadata["validation"].contact
             / fine.metadata["validation"].contact)
    assert 3.5 <= ratio <= 4.5             # measured 3.873


def test_zero_tube_s2_family_is_planes_through_the_axis():
    curve = ch.line_sphere_curve(64, -1.0, 1.0, radius=0.0)
    grid = ch.envelope(curve, 64)
    assert grid.metadata["validation"].passed
    data = curvature_data(grid)
    assert np.max(projective_gap(data.s1, curve.vectors[:, None, :])) <= 1e-10
    s2 = data.s2 / np.linalg.norm(data.s2, axis=-1, keepdims=True)
    # plane lifts have x4 + x5 = 0; through the z-axis means offset 0 and
    # normal orthogonal to e3
    assert np.max(np.abs(s2[..., 3] + s2[..., 4])) <= 1e-12
    assert np.max(np.abs((s2[..., 3] - s2[..., 4]) / 2.0)) <= 1e-12
    assert np.max(np.abs(s2[..., 2])) <= 1e-12


def test_torus_envelope_closes_periodically():
    curve, grid = torus_envelope()
    assert grid.periodic_u
    assert grid.metadata["holonomy_mismatch"] <= 1e-10   # measured 1.4e-15
    assert grid.metadata["validation"].passed
    assert is_channel(grid).circular_dir == "both"


def test_helix_envelope_is_one_way_channel():
    curve = ch.helix_sphere_curve(64, radius=0.6)
    grid = ch.envelope(curve, 64)
    assert grid.metadata["validation"].passed
    report = is_channel(grid)
    assert report.circular_dir == "dir1"
    assert report.consistent


def test_envelope_accepts_equivalent_space_override():
    curve, _ = torus_envelope(48)
    stacks, ok = ch.osculating_spaces(curve)
    assert ok.all()
    grid = ch.envelope(curve, 48, spaces=stacks)
    assert grid.metadata["validation"].passed


def test_envelope_rejects_spaces_missing_the_curve():
    curve, _ = torus_envelope(48)
    bad = np.broadcast_to(np.eye(6)[:3], (curve.u_values.size, 3, 6)).copy()
    with pytest.raises(GeometryError):
        ch.envelope(curve, 16, spaces=bad)


# ---------------------------------------------------------------------------
# special lifts and the middle one-form
# ---------------------------------------------------------------------------

def test_special_lift_gauges():
    curve, _ = cylinder_envelope()
    unit = ch.special_lift(curve, "unit")
    assert np.allclose(np.linalg.norm(unit, axis=-1), 1.0, atol=1e-14)
    tilted = ch.special_lift(curve, "against_p", E6)
    assert np.max(np.abs(binner(tilted, E6) + 1.0)) <= 1e-14
    # unit-radius spheres pair with e6 as -1 already, so the gauge is a no-op
    assert np.max(np.abs(tilted - curve.vectors)) == 0.0
    with pytest.raises(ValueError):
        ch.special_lift(curve, "frobn")
    point_curve = ch.line_sphere_curve(16, radius=0.0)
    with pytest.raises(GeometryError, match="orthogonal to p"):
        ch.special_lift(point_curve, "against_p", E6)


def test_omega0_q_is_minus_one_on_the_cylinder():
    omega = cylinder_omega()
    assert np.max(np.abs(omega.q_uu + 1.0)) <= 1e-12   # measured 1.1e-14


def test_omega0_is_closed_with_vanishing_bracket():
    omega = cylinder_omega()
    assert omega.closedness <= 1e-15
    assert omega.bracket <= 1e-15
    assert np.max(np.abs(omega.eta_theta)) == 0.0


def test_omega0_eta_maps_are_metric_skew():
    omega = cylinder_omega()
    sym = SIGNS[:, None] * omega.eta_u + np.swapaxes(
        SIGNS[:, None] * omega.eta_u, -1, -2)
    assert np.max(np.abs(sym)) <= 1e-12


def test_q_scales_as_the_square_of_the_gauge():
    curve, grid = cylinder_envelope()
    omega = cylinder_omega()
    om2 = ch.omega0_form(grid, 2.0 * omega.sigma1)
    assert np.max(np.abs(om2.q_uu - 4.0 * omega.q_uu)) <= 1e-12
    mu = 1.0 + 0.3 * np.sin(curve.u_values)
    om3 = ch.omega0_form(grid, mu[:, None] * omega.sigma1)
    # non-polynomial gauge: agreement limited by the open-end stencils
    assert np.max(np.abs(om3.q_uu - mu**2 * omega.q_uu)) <= 5e-3


def test_omega0_rejects_wrong_sphere_family():
    curve, grid = cylinder_envelope()
    scrambled = np.roll(curve.vectors, 7, axis=0)
    with pytest.raises(GeometryError, match="does not lift"):
        ch.omega0_form(grid, scrambled)


def test_omega0_rejects_non_channel_grids():
    from liechannel import presets
    from liechannel.legendre import make_legendre_from_surface
    grid = make_legendre_from_surface(*presets.ellipsoid_surface(48, 48))
    with pytest.raises(GeometryError, match="not a channel"):
        ch.omega0_form(grid, grid.sigma[:, 0])


def test_torus_omega0_quadratic_form():
    curve, grid = torus_envelope()
    sigma1 = ch.special_lift(curve, "against_p", E6)
    omega = ch.omega0_form(grid, sigma1)
    # (sigma', sigma') = ring_radius^2 at tube radius 1; derivative is
    # fourth-order accurate away from ends (periodic: everywhere)
    assert np.max(np.abs(omega.q_uu + 4.0)) <= 1e-3    # measured 2.5e-5


# ---------------------------------------------------------------------------
# conserved quantities
# ---------------------------------------------------------------------------

def test_conserved_quantity_exact_on_cylinder():
    omega = cylinder_omega()
    report = ch.conserved_quantity(omega, E6, [-1.0, 0.0, 1.0, 2.0, 3.0],
                                   tol=1e-8)
    assert report.passed
    assert report.normalisation_defect <= 1e-14
    assert report.residuals[0.0] == 0.0
    for lam, res in report.residuals.items():
        assert res <= 1e-13, (lam, res)    # measured <= 1.4e-15
    assert "ok" in str(report)


def test_wrong_gauge_is_rejected_then_measurably_fails():
    curve, grid = cylinder_envelope()
    unit = ch.special_lift(curve, "unit")
    omega = ch.omega0_form(grid, unit)
    with pytest.raises(GeometryError, match="not normalised"):
        ch.conserved_quantity(omega, E6, [1.0])
    report = ch.conserved_quantity(omega, E6, [-1.0, 1.0, 2.0, 3.0],
                                   strict=False)
    assert not report.passed
    assert report.normalisation_defect >= 0.3          # measured 0.368
    for res in report.residuals.values():
        assert res >= 1e-3                             # measured >= 1.4e-2
    assert report.notes


def test_conserved_quantity_on_torus_converges_locally():
    results = {}
    for n in (32, 64):
        curve = ch.circle_sphere_curve(n, 2.0, 1.0)
        grid = ch.envelope(curve, n)
        omega = ch.omega0_form(grid, ch.special_lift(curve, "against_p", E6))
        report = ch.conserved_quantity(omega, E6, [1.0])
        assert report.passed
        results[n] = report.residuals[1.0]
    # per-edge residuals are local truncation errors: third order
    assert results[32] / results[64] >= 6.0            # measured 8.1


def test_convergence_helper():
    assert ch.converges_quadratically(1e-3, 2.4e-4)
    assert not ch.converges_quadratically(1e-3, 9e-4)
    assert ch.converges_quadratically(3e-15, 5e-15)    # both at rounding


# ---------------------------------------------------------------------------
# parametric families
# ---------------------------------------------------------------------------

@settings(max_examples=10, deadline=None)
@given(radius=st.floats(0.4, 2.5))
def test_line_envelope_radius_is_reproduced(radius):
    curve = ch.line_sphere_curve(32, -1.0, 1.0, radius=radius)
    grid = ch.envelope(curve, 32)
    positions, finite = grid_point_spheres(grid.sigma, grid.tau)
    assert finite.all()
    dist = np.hypot(positions[..., 0], positions[..., 1])
    assert np.max(np.abs(dist - radius)) <= 1e-10


@settings(max_examples=8, deadline=None)
@given(ring=st.floats(1.6, 3.0), tube=st.floats(0.4, 0.9))
def test_every_torus_envelope_conserves_its_quantity(ring, tube):
    curve = ch.circle_sphere_curve(48, ring_radius=ring, radius=tube)
    grid = ch.envelope(curve, 48)
    assert grid.periodic_u
    sigma1 = ch.special_lift(curve, "against_p", E6)
    assert np.max(np.abs(binner(sigma1, E6) + 1.0)) <= 1e-12
    omega = ch.omega0_form(grid, sigma1)
    report = ch.conserved_quantity(omega, E6, [-1.0, 1.0, 2.0])
    assert report.passed
