"""Sphere curves and the surfaces they sweep out.

A one-parameter family of oriented spheres envelopes a surface along a
circle's worth of contact elements per parameter value: the sphere s(u),
its derivative and its second derivative span a (2,1) space V(u) whose
orthogonal complement carries a circle of null lines, and each of those
lines completes s(u) to a contact element.  This module builds that
envelope as a LegendreGrid, together with the distinguished one-form and
quadratic differential such grids carry, and the linear conserved quantity
that characterises them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import stencils
from .core import (
    DIM,
    SIGNS,
    GeometryError,
    Subspace,
    complement_rows,
    lightcone_frame,
    projective_gap,
    wedge_matrix,
)
from .legendre import LegendreGrid, curvature_data, is_channel, validate_legendre


def _binner(a, b):
    return np.einsum("...i,...i->...", a, SIGNS * b)


# ---------------------------------------------------------------------------
# sphere curves
# ---------------------------------------------------------------------------

@dataclass
class SphereCurve:
    """Discrete curve of oriented spheres: one null 6-vector per u-sample.

    jet, when provided, maps a u-array to exact (value, first, second)
    derivative arrays; otherwise derivatives come from finite differences
    (fourth order in the interior, since the second derivative feeds the
    osculating-space construction; order two at open ends).
    """

    vectors: np.ndarray
    u_values: np.ndarray
    periodic_u: bool = False
    jet: Optional[Callable] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.u_values = np.asarray(self.u_values, dtype=float)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != DIM:
            raise GeometryError("curve samples must have shape (n, 6)")
        if self.vectors.shape[0] != self.u_values.size:
            raise GeometryError("sample count does not match the u-grid")
        if self.vectors.shape[0] < 5:
            raise GeometryError("need at least 5 samples for curve derivatives")

    @property
    def du(self) -> float:
        return float(self.u_values[1] - self.u_values[0])

    def derivatives(self):
        """(first, second) u-derivatives of the sample vectors."""
        if self.jet is not None:
            _, d1, d2 = self.jet(self.u_values)
            return np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
        return (stencils.diff1_5pt(self.vectors, self.du, periodic=self.periodic_u),
                stencils.diff2_5pt(self.vectors, self.du, periodic=self.periodic_u))

    def nullity(self) -> float:
        """Worst |(sigma, sigma)| relative to the Euclidean norm squared."""
        scale = np.einsum("ij,ij->i", self.vectors, self.vectors)
        return float(np.max(np.abs(_binner(self.vectors, self.vectors)) / scale))

    def regularity_values(self) -> np.ndarray:
        """Quotient-metric speed (sigma', sigma') of the unit-scaled lift.

        The quotient of the first osculating space by the curve itself
        inherits this quadratic form; the curve is regular where it is
        positive.  Scaling sigma only contributes terms proportional to
        (sigma, sigma') = 0, so dividing by the Euclidean norm squared is
        exact.
        """
        d1, _ = self.derivatives()
        scale = np.einsum("ij,ij->i", self.vectors, self.vectors)
        return _binner(d1, d1) / scale

    def check(self, null_tol: float = 1e-10, reg_min: float = 1e-6) -> None:
        if self.nullity() > null_tol:
            raise GeometryError(
                f"curve samples are not null (worst {self.nullity():.3e})")
        reg = self.regularity_values()
        bad = np.flatnonzero(reg <= reg_min)
        if bad.size:
            raise GeometryError(
                f"curve is not regular at samples {bad[:8].tolist()} "
                f"(min speed {reg.min():.3e})")


def _lift_jet(c, c1, c2, r, r1, r2):
    """Closed-form 2-jet of the sphere lift from a centre/radius 2-jet."""
    c = np.asarray(c, dtype=float)
    cdot = np.einsum("...i,...i->...", c, c)
    cd1 = np.einsum("...i,...i->...", c, c1)
    cd2 = np.einsum("...i,...i->...", c1, c1) + np.einsum("...i,...i->...", c, c2)
    rr1 = r * r1
    rr2 = r1 * r1 + r * r2
    def assemble(p3, p4, p6):
        out = np.empty(p3.shape[:-1] + (DIM,))
        out[..., :3] = p3
        out[..., 3] = p4
        out[..., 4] = -p4
        out[..., 5] = p6
        return out
    val = assemble(c, (1.0 - cdot + r * r) / 2.0, r)
    val[..., 4] = (1.0 + cdot - r * r) / 2.0
    d1 = assemble(c1, -cd1 + rr1, r1)
    d2 = assemble(c2, -cd2 + rr2, r2)
    return val, d1, d2


def _radius_profile(radius):
    if callable(radius):
        return radius
    r0 = float(radius)

    def constant(u):
        u = np.asarray(u, dtype=float)
        return np.full_like(u, r0), np.zeros_like(u), np.zeros_like(u)

    return constant


def curve_from_profile(center_fn: Callable, radius, u_values,
                       periodic_u: bool = False, **metadata) -> SphereCurve:
    """Sphere curve from analytic centre and radius 2-jets.

    center_fn(u) must return (c, c', c'') with trailing axis 3; radius is a
    constant or a callable returning (r, r', r'').
    """
    rad = _radius_profile(radius)

    def jet(u):
        return _lift_jet(*center_fn(u), *rad(u))

    vectors = jet(np.asarray(u_values, dtype=float))[0]
    return SphereCurve(vectors, u_values, periodic_u=periodic_u, jet=jet,
                       metadata=dict(metadata))


def line_sphere_curve(n: int = 64, u_min: float = -1.0, u_max: float = 1.0,
                      radius=1.0, direction=(0.0, 0.0, 1.0),
                      origin=(0.0, 0.0, 0.0)) -> SphereCurve:
    """Spheres with centres on a straight line (tubes over lines)."""
    d = np.asarray(direction, dtype=float)
    o = np.asarray(origin, dtype=float)

    def center(u):
        u = np.asarray(u, dtype=float)
        c = o + u[..., None] * d
        return c, np.broadcast_to(d, c.shape).copy(), np.zeros_like(c)

    return curve_from_profile(center, radius, np.linspace(u_min, u_max, n),
                              source="line")


def circle_sphere_curve(n: int = 64, ring_radius: float = 2.0,
                        radius=1.0) -> SphereCurve:
    """Spheres with centres on a circle in the xy-plane (torus tubes)."""
    R = float(ring_radius)

    def center(u):
        u = np.asarray(u, dtype=float)
        c = np.stack([R * np.cos(u), R * np.sin(u), np.zeros_like(u)], axis=-1)
        c1 = np.stack([-R * np.sin(u), R * np.cos(u), np.zeros_like(u)], axis=-1)
        return c, c1, -c
    u = np.arange(n) * (2.0 * np.pi / n)
    return curve_from_profile(center, radius, u, periodic_u=True, source="circle")


def helix_sphere_curve(n: int = 64, ring_radius: float = 2.0,
                       pitch: float = 0.5, radius=0.6,
                       turns: float = 1.5) -> SphereCurve:
    """Spheres with centres on a circular helix."""
    R, p = float(ring_radius), float(pitch)

    def center(u):
        u = np.asarray(u, dtype=float)
        c = np.stack([R * np.cos(u), R * np.sin(u), p * u], axis=-1)
        c1 = np.stack([-R * np.sin(u), R * np.cos(u), np.full_like(u, p)], axis=-1)
        c2 = np.stack([-R * np.cos(u), -R * np.sin(u), np.zeros_like(u)], axis=-1)
        return c, c1, c2

    u = np.linspace(0.0, 2.0 * np.pi * turns, n)
    return curve_from_profile(center, radius, u, source="helix")


# ---------------------------------------------------------------------------
# the envelope construction
# ---------------------------------------------------------------------------

def osculating_spaces(curve: SphereCurve):
    """Per-sample stacks {sigma, sigma', sigma''} and their (2,1) verdicts."""
    d1, d2 = curve.derivatives()
    stacks = np.stack([curve.vectors, d1, d2], axis=1)
    gram = stacks @ np.swapaxes(SIGNS * stacks, -1, -2)
    ev = np.linalg.eigvalsh(gram)
    tol = 1e-9 * np.maximum(np.max(np.abs(ev), axis=-1), 1e-300)[:, None]
    ok = ((np.sum(ev > tol, axis=-1) == 2) & (np.sum(ev < -tol, axis=-1) == 1))
    return stacks, ok


def _transport_frame(prev: np.ndarray, fiber: np.ndarray) -> np.ndarray:
    """Carry a (+,+,-) frame into the next fibre by metric projection.

    Projects each frame row onto the span of the fibre rows, then runs a
    signature-aware Gram-Schmidt.  Sign continuity with the previous frame
    is restored afterwards (flips keep orthonormality).
    """
    gram = fiber @ (SIGNS * fiber).T
    try:
        coords = np.linalg.solve(gram, fiber @ (SIGNS * prev).T)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("circle-frame transport degenerated") from exc
    cand = coords.T @ fiber
    out = np.empty_like(cand)
    signs = (1.0, 1.0, -1.0)
    for k in range(3):
        v = cand[k]
        for m in range(k):
            v = v - signs[m] * _binner(v, out[m]) * out[m]
        norm2 = signs[k] * _binner(v, v)
        if norm2 <= 1e-14:
            raise GeometryError("circle-frame transport degenerated")
        out[k] = v / np.sqrt(norm2)
        if np.dot(out[k], prev[k]) < 0.0:
            out[k] = -out[k]
    return out


def envelope(curve: SphereCurve, n_theta: int = 64,
             spaces: Optional[np.ndarray] = None,
             holonomy_tol: float = 1e-8) -> LegendreGrid:
    """Legendre grid swept by a regular sphere curve.

    Each contact element is spanned by the sphere s(u) and one point of the
    lightcone circle of V(u)^perp, where V defaults to the osculating space
    span{sigma, sigma', sigma''} (an override with the same shape and
    signature is accepted).  The circle frames are parallel-transported
    along u so the theta-parametrisation is continuous; a periodic curve
    whose normal bundle has holonomy cannot close up, in which case the
    grid falls back to an open u-axis with a diagnostic note.
    """
    curve.check()
    if spaces is None:
        stacks, ok = osculating_spaces(curve)
    else:
        stacks = np.asarray(spaces, dtype=float)
        if stacks.shape != (curve.u_values.size, 3, DIM):
            raise GeometryError("space override must have shape (n, 3, 6)")
        gram = stacks @ np.swapaxes(SIGNS * stacks, -1, -2)
        ev = np.linalg.eigvalsh(gram)
        tol = 1e-9 * np.maximum(np.max(np.abs(ev), axis=-1), 1e-300)[:, None]
        ok = ((np.sum(ev > tol, axis=-1) == 2) & (np.sum(ev < -tol, axis=-1) == 1))
        # the enveloped sphere must sit inside every supplied space
        for i in (0, stacks.shape[0] // 2, stacks.shape[0] - 1):
            if Subspace.from_vectors(stacks[i]).containment_gap(
                    curve.vectors[i]) > 1e-9:
                raise GeometryError("space override does not contain the curve")
    if not ok.all():
        bad = np.flatnonzero(~ok)
        raise GeometryError(
            f"osculating space is not (2,1) at samples {bad[:8].tolist()} "
            "(sphere-curve inflection)")

    perp = complement_rows(stacks)
    n = curve.u_values.size
    frames = np.empty((n, 3, DIM))
    frames[0] = lightcone_frame(Subspace(perp[0]))
    for k in range(1, n):
        frames[k] = _transport_frame(frames[k - 1], perp[k])

    metadata = {"source": "envelope"}
    periodic_u = curve.periodic_u
    if periodic_u:
        wrap = _transport_frame(frames[-1], perp[0])
        mismatch = float(np.max(np.abs(wrap - frames[0])))
        metadata["holonomy_mismatch"] = mismatch
        if mismatch > holonomy_tol:
            periodic_u = False
            metadata["note"] = ("normal-bundle holonomy prevents a periodic "
                                "grid; falling back to an open u-axis")

    theta = np.arange(n_theta) * (2.0 * np.pi / n_theta)
    circle = (np.cos(theta)[None, :, None] * frames[:, None, 0]
              + np.sin(theta)[None, :, None] * frames[:, None, 1]
              + frames[:, None, 2])
    sigma = np.broadcast_to(curve.vectors[:, None, :], circle.shape).copy()
    grid = LegendreGrid(sigma, circle, curve.u_values, theta,
                        periodic_u=periodic_u, periodic_theta=True,
                        metadata=metadata)
    grid.metadata["validation"] = validate_legendre(grid)
    return grid


# ---------------------------------------------------------------------------
# the distinguished one-form of a channel grid
# ---------------------------------------------------------------------------

def special_lift(curve: SphereCurve, mode: str = "unit",
                 p_vec: Optional[np.ndarray] = None,
                 tol: float = 1e-9) -> np.ndarray:
    """Scale the curve's lift to a distinguished gauge.

    'unit' rescales each sample to Euclidean norm one.  'against_p' scales
    so the pairing with the given timelike direction is exactly -1, the
    normalisation under which the conserved quantity below is parallel.
    Both outputs depend on u only, which is what makes them special: the
    derivative along the circular direction vanishes identically.
    """
    vectors = curve.vectors
    if mode == "unit":
        return vectors / np.linalg.norm(vectors, axis=-1, keepdims=True)
    if mode == "against_p":
        if p_vec is None:
            raise ValueError("against_p normalisation needs p_vec")
        ip = _binner(vectors, np.asarray(p_vec, dtype=float))
        bad = np.flatnonzero(np.abs(ip) < tol)
        if bad.size:
            raise GeometryError(
                f"curve is orthogonal to p at samples {bad[:8].tolist()}")
        return -vectors / ip[:, None]
    raise ValueError(f"unknown lift mode {mode!r}")


@dataclass
class Omega0Structure:
    """The middle one-form of a channel grid and its quadratic differential.

    eta has no theta-component (the form annihilates the circular
    direction) and its u-component is the wedge of the special lift with
    its u-derivative; q_uu is the single surviving coefficient of the
    quadratic differential.  closedness and bracket are the measured
    discrete residuals of d(eta) = 0 and [eta ^ eta] = 0; both vanish to
    rounding because eta is theta-independent with one component.
    """

    sigma1: np.ndarray            # (n, 6) special lift
    dsigma1: np.ndarray           # its u-derivative
    eta_u: np.ndarray             # (n, 6, 6) skew maps
    q_uu: np.ndarray              # (n,)
    u_values: np.ndarray
    periodic_u: bool
    star_convention: str
    closedness: float
    bracket: float

    @property
    def du(self) -> float:
        return float(self.u_values[1] - self.u_values[0])

    @property
    def eta_theta(self) -> np.ndarray:
        return np.zeros_like(self.eta_u)


def omega0_form(grid: LegendreGrid, sigma1: np.ndarray,
                data=None, channel_report=None) -> Omega0Structure:
    """Middle one-form eta = sigma1 ^ (star d sigma1) of a channel grid.

    sigma1 must be a theta-independent lift of the circular-direction
    curvature sphere family (one 6-vector per u-sample).  The star acts as
    the identity on the non-circular conormal direction and as minus the
    identity on the circular one, so d(sigma1) having only a u-component
    makes eta = wedge(sigma1, sigma1') du.
    """
    sigma1 = np.asarray(sigma1, dtype=float)
    nu, nt = grid.shape
    if sigma1.shape != (nu, DIM):
        raise GeometryError("sigma1 must be a u-grid of 6-vectors")
    if data is None:
        data = curvature_data(grid)
    if channel_report is None:
        channel_report = is_channel(grid, data)
    if not channel_report.circular("dir1"):
        raise GeometryError(
            "grid is not a channel along dir1; the middle one-form needs a "
            f"circular first family (verdict: {channel_report.circular_dir})")
    for j in (0, nt // 2):
        gaps = projective_gap(sigma1, data.s1[:, j])
        if float(np.max(gaps)) > 1e-6:
            raise GeometryError("sigma1 does not lift the first curvature "
                                "sphere family of this grid")

    dsigma1 = stencils.diff1_5pt(sigma1, grid.du, periodic=grid.periodic_u)
    eta_u = wedge_matrix(sigma1, dsigma1)
    q_uu = -_binner(dsigma1, dsigma1)

    # discrete exterior derivative over grid plaquettes; eta_theta = 0 and
    # eta_u is theta-independent, so this is zero to the last bit -- but
    # measure it rather than assert it
    eta_grid = np.broadcast_to(eta_u[:, None], (nu, nt, DIM, DIM))
    d_theta = stencils.diff1(eta_grid, grid.dtheta, axis=1, periodic=True)
    closedness = float(np.max(np.abs(d_theta)))
    theta_comp = np.zeros_like(eta_u)
    br = ((eta_u @ theta_comp - theta_comp @ eta_u)
          - (theta_comp @ eta_u - eta_u @ theta_comp))
    bracket = float(np.max(np.abs(br)))
    return Omega0Structure(
        sigma1=sigma1, dsigma1=dsigma1, eta_u=eta_u, q_uu=q_uu,
        u_values=grid.u_values, periodic_u=grid.periodic_u,
        star_convention="star = -id on the circular conormal, +id transverse",
        closedness=closedness, bracket=bracket,
    )


# ---------------------------------------------------------------------------
# the linear conserved quantity
# ---------------------------------------------------------------------------

@dataclass
class ConservedQuantityReport:
    residuals: dict                  # lambda -> worst edge residual
    normalisation_defect: float
    tol: float
    passed: bool
    notes: list

    def __str__(self):
        worst = max(self.residuals.values()) if self.residuals else 0.0
        status = "ok" if self.passed else "FAILED"
        return (f"conserved quantity [{status}]: worst={worst:.3e} "
                f"defect={self.normalisation_defect:.3e}")


def conserved_quantity(omega: Omega0Structure, p_vec: np.ndarray,
                       lambdas: Sequence[float], tol: Optional[float] = None,
                       strict: bool = True) -> ConservedQuantityReport:
    """Check that p + lambda*sigma1 is parallel for d + lambda*eta.

    Requires the against_p normalisation (sigma1, p) = -1; with strict=True
    a violation raises, otherwise it is recorded and the (failing)
    residuals are still measured -- that is the negative control for
    wrongly-normalised lifts.  Edge residuals use trapezoidal averaging of
    both the connection and the section, so exact data yields rounding-
    level numbers and smooth data O(du^2).
    """
    p_vec = np.asarray(p_vec, dtype=float)
    defect = float(np.max(np.abs(_binner(omega.sigma1, p_vec) + 1.0)))
    notes = []
    if defect > 1e-8:
        if strict:
            raise GeometryError(
                f"lift is not normalised against p (defect {defect:.3e}); "
                "build it with special_lift(..., mode='against_p')")
        notes.append(f"normalisation defect {defect:.3e}; residuals are "
                     "expected to be O(1)")

    du = omega.du
    if tol is None:
        tol = max(1e-8, 10.0 * du * du)
    sections = {}
    for lam in lambdas:
        sections[lam] = p_vec + lam * omega.sigma1
    if omega.periodic_u:
        nxt = lambda arr: np.roll(arr, -1, axis=0)
        cur = lambda arr: arr
    else:
        nxt = lambda arr: arr[1:]
        cur = lambda arr: arr[:-1]

    residuals = {}
    for lam, p_vals in sections.items():
        dp = nxt(p_vals) - cur(p_vals)
        eta_avg = 0.5 * (nxt(omega.eta_u) + cur(omega.eta_u)) * du
        p_mid = 0.5 * (nxt(p_vals) + cur(p_vals))
        res = dp + lam * np.einsum("kij,kj->ki", eta_avg, p_mid)
        residuals[lam] = float(np.max(np.linalg.norm(res, axis=-1)))
    passed = defect <= 1e-8 and all(r <= tol for r in residuals.values())
    return ConservedQuantityReport(residuals=residuals,
                                   normalisation_defect=defect,
                                   tol=tol, passed=passed, notes=notes)


def converges_quadratically(coarse: float, fine: float,
                            floor: float = 1e-12, factor: float = 3.0) -> bool:
    """Step-halving acceptance: quartering, or both already at rounding.

    Structurally-exact residuals sit at machine precision on every grid, so
    demanding a ratio there would divide noise by noise; two values below
    the floor count as converged.
    """
    if coarse <= floor and fine <= floor:
        return True
    return fine <= coarse / factor
