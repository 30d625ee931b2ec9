"""Legendre maps as grids of isotropic 2-planes, and their diagnostics.

A surface in Lie sphere geometry is stored as a grid of adapted frames
(sigma, tau): two null, mutually orthogonal 6-vectors spanning the contact
element at each sample.  All validation (isotropy, contact, immersion),
curvature-sphere extraction, the orthogonal splitting into the two
"cyclide" rank-3 subbundles, and channel detection live here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stencils
from .core import (
    DIM,
    SIGNS,
    GeometryError,
    Subspace,
    complement_rows,
    projective_gap,
)


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=-1, keepdims=True)


def _binner(a, b):
    return np.einsum("...i,...i->...", a, SIGNS * b)


def lift_points(positions: np.ndarray) -> np.ndarray:
    """Batched null lift of Euclidean points (radius-0 spheres)."""
    p = np.asarray(positions, dtype=float)
    pp = np.einsum("...i,...i->...", p, p)
    out = np.empty(p.shape[:-1] + (DIM,))
    out[..., :3] = p
    out[..., 3] = (1.0 - pp) / 2.0
    out[..., 4] = (1.0 + pp) / 2.0
    out[..., 5] = 0.0
    return out


def lift_spheres(centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Batched null lift of oriented spheres."""
    c = np.asarray(centers, dtype=float)
    r = np.asarray(radii, dtype=float)
    cc = np.einsum("...i,...i->...", c, c)
    out = np.empty(c.shape[:-1] + (DIM,))
    out[..., :3] = c
    out[..., 3] = (1.0 - cc + r * r) / 2.0
    out[..., 4] = (1.0 + cc - r * r) / 2.0
    out[..., 5] = r
    return out


def lift_planes(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Batched null lift of oriented planes (unit normals assumed)."""
    n = np.asarray(normals, dtype=float)
    d = np.asarray(offsets, dtype=float)
    out = np.empty(n.shape[:-1] + (DIM,))
    out[..., :3] = n
    out[..., 3] = -d
    out[..., 4] = d
    out[..., 5] = 1.0
    return out


def align_signs_grid(fields: np.ndarray) -> np.ndarray:
    """Flip signs over a (nu, nt, d) grid so neighbouring vectors correlate.

    Works row 0 along theta first, then each u-row against the previous one.
    Purely a representative-smoothing device: the projective content is
    unchanged.
    """
    out = np.array(fields, dtype=float)
    row = out[0]
    for j in range(1, row.shape[0]):
        if np.dot(row[j], row[j - 1]) < 0.0:
            row[j] = -row[j]
    for i in range(1, out.shape[0]):
        flip = np.einsum("jd,jd->j", out[i], out[i - 1]) < 0.0
        out[i][flip] = -out[i][flip]
    return out


def _pair_mismatch(a1, a2, b1, b2):
    """Sum of squared projective gaps pairing (a1, a2) with (b1, b2)."""
    return projective_gap(a1, b1) ** 2 + projective_gap(a2, b2) ** 2


def align_labels_grid(*pairs):
    """Make a two-family labelling continuous across a grid.

    pairs is a sequence of (field1, field2) tuples that must be swapped in
    lockstep (directions plus their kernel spheres).  Continuity is judged on
    the first pair.  The greedy sweep (row 0 along theta, then row by row)
    removes the label flicker that per-point conventions produce wherever
    the two families happen to tie on the convention's score.
    """
    outs = [(np.array(p, dtype=float), np.array(q, dtype=float))
            for p, q in pairs]
    d1, d2 = outs[0]
    nu, nt = d1.shape[:2]

    def swap_at(mask):
        for p, q in outs:
            tmp = np.array(p[mask])
            p[mask] = q[mask]
            q[mask] = tmp

    for j in range(1, nt):
        keep = _pair_mismatch(d1[0, j], d2[0, j], d1[0, j - 1], d2[0, j - 1])
        swap = _pair_mismatch(d1[0, j], d2[0, j], d2[0, j - 1], d1[0, j - 1])
        if swap < keep:
            swap_at((0, j))
    for i in range(1, nu):
        keep = _pair_mismatch(d1[i], d2[i], d1[i - 1], d2[i - 1])
        swap = _pair_mismatch(d1[i], d2[i], d2[i - 1], d1[i - 1])
        row_mask = np.zeros((nu, nt), dtype=bool)
        row_mask[i] = swap < keep
        if row_mask.any():
            swap_at(row_mask)
    return [x for pair in outs for x in pair]


@dataclass
class LegendreGrid:
    """Grid of contact elements, each spanned by the frame pair (sigma, tau).

    Frame vectors are stored exactly as given (no per-sample rescaling):
    grids built from coherent lift formulas then keep pencil coefficients
    constant along symmetry directions, which makes the downstream
    finite-difference extractions exact instead of O(h^2).
    """

    sigma: np.ndarray
    tau: np.ndarray
    u_values: np.ndarray
    theta_values: np.ndarray
    periodic_u: bool = False
    periodic_theta: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.tau = np.asarray(self.tau, dtype=float)
        if self.sigma.shape != self.tau.shape or self.sigma.shape[-1] != DIM:
            raise GeometryError("frame arrays must both have shape (nu, nt, 6)")
        self.u_values = np.asarray(self.u_values, dtype=float)
        self.theta_values = np.asarray(self.theta_values, dtype=float)

    @property
    def shape(self):
        return self.sigma.shape[:2]

    @property
    def du(self) -> float:
        u = self.u_values
        return float(u[1] - u[0])

    @property
    def dtheta(self) -> float:
        t = self.theta_values
        return float(t[1] - t[0])

    def element(self, i: int, j: int) -> Subspace:
        return Subspace.from_vectors([self.sigma[i, j], self.tau[i, j]])

    def frame_derivatives(self):
        """First differences of both frame fields along u and theta."""
        du, dt = self.du, self.dtheta
        return (
            stencils.diff1(self.sigma, du, axis=0, periodic=self.periodic_u),
            stencils.diff1(self.sigma, dt, axis=1, periodic=self.periodic_theta),
            stencils.diff1(self.tau, du, axis=0, periodic=self.periodic_u),
            stencils.diff1(self.tau, dt, axis=1, periodic=self.periodic_theta),
        )


def make_legendre_from_surface(points: np.ndarray, normals: np.ndarray,
                               u_values: np.ndarray, theta_values: np.ndarray,
                               periodic_u: bool = False,
                               periodic_theta: bool = False) -> LegendreGrid:
    """Contact lift of an immersed surface given points and unit normals."""
    points = np.asarray(points, dtype=float)
    normals = np.asarray(normals, dtype=float)
    offs = np.einsum("...i,...i->...", points, normals)
    return LegendreGrid(
        sigma=lift_points(points),
        tau=lift_planes(normals, offs),
        u_values=u_values,
        theta_values=theta_values,
        periodic_u=periodic_u,
        periodic_theta=periodic_theta,
        metadata={"source": "surface"},
    )


# ---------------------------------------------------------------------------
# quotient bundle f^perp / f and the solder form
# ---------------------------------------------------------------------------

def _quotient_frames(grid: LegendreGrid):
    """Per-point machinery for the rank-2 positive quotient of each element.

    Returns (w_basis, quotient_gram) where w_basis[i, j] has two rows spanning
    a complement of the element inside its orthogonal space, Euclidean-
    orthogonal to the element (so quotient coordinates are plain dot
    products).
    """
    frames = np.stack([grid.sigma, grid.tau], axis=-2)          # (nu,nt,2,6)
    perp = complement_rows(frames)                              # (nu,nt,4,6)
    # orthonormal basis of the element itself (Euclidean)
    _, _, vt = np.linalg.svd(frames, full_matrices=False)
    f_basis = vt                                                # (nu,nt,2,6)
    overlap = perp @ np.swapaxes(f_basis, -1, -2)               # (nu,nt,4,2)
    uu, _, _ = np.linalg.svd(overlap)
    w_coords = uu[..., :, 2:]                                   # (nu,nt,4,2)
    w_basis = np.swapaxes(w_coords, -1, -2) @ perp              # (nu,nt,2,6)
    w_basis = _unit(w_basis)
    qgram = w_basis @ np.swapaxes(SIGNS * w_basis, -1, -2)      # (nu,nt,2,2)
    return w_basis, qgram


@dataclass
class LegendreReport:
    isotropy: float
    contact: float
    immersion: float
    quotient_min_eig: float
    passed: bool
    tolerances: dict
    notes: list

    def __str__(self):
        status = "ok" if self.passed else "FAILED"
        return (f"legendre check [{status}]: isotropy={self.isotropy:.3e} "
                f"contact={self.contact:.3e} immersion={self.immersion:.3e}")


def validate_legendre(grid: LegendreGrid, tol_isotropy: float = 1e-9,
                      tol_contact: Optional[float] = None,
                      immersion_min: float = 1e-4) -> LegendreReport:
    """Measure the defining conditions of a Legendre map on the grid.

    isotropy: worst inner product among unit frame vectors.
    contact: worst inner product of a unit-frame derivative against the
        element (second-order differences, so expect O(h^2) for an exact
        surface).
    immersion: smallest singular value over the grid of the solder form as a
        4x2 matrix (directions to quotient-valued derivatives).

    Measurements use unit-rescaled copies of the frames so the numbers are
    scale-free; the grid itself is left untouched.
    """
    notes = []
    s, t = _unit(grid.sigma), _unit(grid.tau)
    iso = max(float(np.max(np.abs(_binner(s, s)))),
              float(np.max(np.abs(_binner(t, t)))),
              float(np.max(np.abs(_binner(s, t)))))

    unit_grid = LegendreGrid(s, t, grid.u_values, grid.theta_values,
                             grid.periodic_u, grid.periodic_theta)
    ds_u, ds_t, dt_u, dt_t = unit_grid.frame_derivatives()
    contact = 0.0
    for dv in (ds_u, ds_t, dt_u, dt_t):
        for fr in (s, t):
            contact = max(contact, float(np.max(np.abs(_binner(dv, fr)))))

    w_basis, qgram = _quotient_frames(unit_grid)
    qeigs = np.linalg.eigvalsh(qgram)
    qmin = float(np.min(qeigs))

    beta = np.empty(grid.shape + (4, 2))
    for col, (dsig, dtau) in enumerate(((ds_u, dt_u), (ds_t, dt_t))):
        beta[..., 0, col] = np.einsum("...d,...d->...", w_basis[..., 0, :], dsig)
        beta[..., 1, col] = np.einsum("...d,...d->...", w_basis[..., 1, :], dsig)
        beta[..., 2, col] = np.einsum("...d,...d->...", w_basis[..., 0, :], dtau)
        beta[..., 3, col] = np.einsum("...d,...d->...", w_basis[..., 1, :], dtau)
    svals = np.linalg.svd(beta, compute_uv=False)
    immersion = float(np.min(svals[..., -1]))

    if tol_contact is None:
        tol_contact = max(1e-8, 5.0 * (grid.du ** 2 + grid.dtheta ** 2))
    if qmin <= 0.0:
        notes.append("quotient metric not positive definite")
    passed = (iso <= tol_isotropy and contact <= tol_contact
              and immersion >= immersion_min and qmin > 0.0)
    return LegendreReport(
        isotropy=iso, contact=contact, immersion=immersion,
        quotient_min_eig=qmin, passed=passed,
        tolerances={"isotropy": tol_isotropy, "contact": tol_contact,
                    "immersion_min": immersion_min},
        notes=notes,
    )


# ---------------------------------------------------------------------------
# curvature spheres
# ---------------------------------------------------------------------------

@dataclass
class CurvatureData:
    """Pointwise curvature spheres and their directions.

    s1/s2 hold unit, sign-aligned representatives; dir1/dir2 are unit vectors
    in the (u, theta) chart.  dir1 is the theta-like direction by the
    labelling convention.  kappa_gap is the projective separation of the two
    spheres; points with gap below the umbilic tolerance are flagged.
    """

    s1: np.ndarray
    s2: np.ndarray
    dir1: np.ndarray
    dir2: np.ndarray
    kappa_gap: np.ndarray
    umbilic: np.ndarray
    discriminant: np.ndarray


def _solve_direction_quadratic(qa, qb, qc, umbilic_tol):
    """Roots (a:b) of qa*a^2 + qb*a*b + qc*b^2 = 0, batched and stabilised."""
    scale = np.maximum(np.maximum(np.abs(qa), np.abs(qc)), np.abs(qb))
    scale = np.where(scale == 0.0, 1.0, scale)
    disc = qb * qb - 4.0 * qa * qc
    degenerate = disc < (umbilic_tol * scale) ** 2
    disc_pos = np.maximum(disc, 0.0)
    sgn = np.where(qb >= 0.0, 1.0, -1.0)
    q = -(qb + sgn * np.sqrt(disc_pos)) / 2.0
    # homogeneous root pairs (a, b): (q, qa) and (qc, q)
    r1 = np.stack([q, qa], axis=-1)
    r2 = np.stack([qc, q], axis=-1)
    # guard the fully degenerate case q == qa == 0 (or qc == 0)
    tiny = 1e-300
    r1 = np.where(np.linalg.norm(r1, axis=-1, keepdims=True) < tiny,
                  np.array([0.0, 1.0]), r1)
    r2 = np.where(np.linalg.norm(r2, axis=-1, keepdims=True) < tiny,
                  np.array([1.0, 0.0]), r2)
    r1 = r1 / np.linalg.norm(r1, axis=-1, keepdims=True)
    r2 = r2 / np.linalg.norm(r2, axis=-1, keepdims=True)
    return r1, r2, disc, degenerate


def curvature_data(grid: LegendreGrid, umbilic_tol: float = 1e-6) -> CurvatureData:
    """Extract both curvature sphere fields by the pencil-degeneration rule.

    At each sample the 2x2 maps M_u, M_t send frame coefficients to quotient
    coordinates of the derivative; a curvature sphere is a pencil member
    killed by some direction, i.e. a root of det(a*M_u + b*M_t) = 0.
    """
    w_basis, _ = _quotient_frames(grid)
    ds_u, ds_t, dt_u, dt_t = grid.frame_derivatives()

    def wcoords(dv):
        return np.einsum("...kd,...d->...k", w_basis, dv)   # (nu,nt,2)

    au_s, at_s = wcoords(ds_u), wcoords(ds_t)
    au_t, at_t = wcoords(dt_u), wcoords(dt_t)

    def det2(p, q):
        return p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]

    qa = det2(au_s, au_t)
    qc = det2(at_s, at_t)
    qb = det2(au_s, at_t) + det2(at_s, au_t)
    r1, r2, disc, degenerate = _solve_direction_quadratic(qa, qb, qc, umbilic_tol)

    def kernel_sphere(direction):
        m = np.empty(grid.shape + (2, 2))
        a = direction[..., 0]
        b = direction[..., 1]
        m[..., :, 0] = a[..., None] * au_s + b[..., None] * at_s
        m[..., :, 1] = a[..., None] * au_t + b[..., None] * at_t
        _, _, vt = np.linalg.svd(m)
        coeff = vt[..., -1, :]                                  # (nu,nt,2)
        return coeff[..., 0, None] * grid.sigma + coeff[..., 1, None] * grid.tau

    k1 = _unit(kernel_sphere(r1))
    k2 = _unit(kernel_sphere(r2))
    # continuous labelling first, then one global swap so that dir1 is the
    # theta-like family whenever the grid has one
    d1, d2, s1, s2 = align_labels_grid((r1, r2), (k1, k2))
    if np.mean(np.abs(d2[..., 1])) > np.mean(np.abs(d1[..., 1])):
        d1, d2, s1, s2 = d2, d1, s2, s1

    s1 = align_signs_grid(s1)
    s2 = align_signs_grid(s2)
    gap = projective_gap(s1, s2)
    umbilic = degenerate | (gap < umbilic_tol)
    d1 = align_signs_grid(d1)
    d2 = align_signs_grid(d2)
    return CurvatureData(s1=s1, s2=s2, dir1=d1, dir2=d2, kappa_gap=gap,
                         umbilic=umbilic, discriminant=disc)


def _directional_derivative(field: np.ndarray, direction: np.ndarray,
                            grid: LegendreGrid) -> np.ndarray:
    a = direction[..., 0, None]
    b = direction[..., 1, None]
    fu = stencils.diff1(field, grid.du, axis=0, periodic=grid.periodic_u)
    ft = stencils.diff1(field, grid.dtheta, axis=1, periodic=grid.periodic_theta)
    return a * fu + b * ft


def _second_directional_derivative(field: np.ndarray, direction: np.ndarray,
                                   grid: LegendreGrid):
    """Iterated derivative along a varying direction field (with the
    first-order correction terms coming from the variation of the field)."""
    du, dt = grid.du, grid.dtheta
    pu, pt = grid.periodic_u, grid.periodic_theta
    a = direction[..., 0]
    b = direction[..., 1]
    fu = stencils.diff1(field, du, axis=0, periodic=pu)
    ft = stencils.diff1(field, dt, axis=1, periodic=pt)
    fuu = stencils.diff2(field, du, axis=0, periodic=pu)
    ftt = stencils.diff2(field, dt, axis=1, periodic=pt)
    fut = stencils.mixed_partial(field, du, dt, periodic_u=pu, periodic_t=pt)
    a_u = stencils.diff1(a, du, axis=0, periodic=pu)
    a_t = stencils.diff1(a, dt, axis=1, periodic=pt)
    b_u = stencils.diff1(b, du, axis=0, periodic=pu)
    b_t = stencils.diff1(b, dt, axis=1, periodic=pt)
    first = a[..., None] * fu + b[..., None] * ft
    second = (
        (a * a)[..., None] * fuu
        + (2.0 * a * b)[..., None] * fut
        + (b * b)[..., None] * ftt
        + (a * a_u + b * a_t)[..., None] * fu
        + (a * b_u + b * b_t)[..., None] * ft
    )
    return first, second


# ---------------------------------------------------------------------------
# cyclide splitting
# ---------------------------------------------------------------------------

@dataclass
class LieCyclideSplit:
    """Pointwise orthogonal splitting into two rank-3 subbundles.

    s1_basis[i,j] spans the 2-jet of the first curvature sphere field along
    the second curvature direction; s2_basis is its metric complement, so
    the splitting is orthogonal by construction.  The geometric content --
    that the complement agrees with the 2-jet span of the second curvature
    sphere along the first direction -- is reported as s2_agreement (O(h^2)
    on exact data).  n_u/n_theta are the components of the difference
    between the flat derivative and the split-adapted one; they exchange
    the two blocks, and block_defect reports the leakage.
    """

    s1_basis: np.ndarray          # (nu, nt, 3, 6)
    s2_basis: np.ndarray          # metric complement of s1_basis
    s2_jet_basis: np.ndarray      # jet span of s2 (diagnostic)
    n_u: np.ndarray               # (nu, nt, 6, 6)
    n_theta: np.ndarray
    signature_ok: np.ndarray      # bool grid
    conditioning: np.ndarray      # min |gram eigenvalue| across both sides
    orthogonality: float
    s2_agreement: float
    block_defect: float
    excluded: np.ndarray          # umbilics, bad signature, edges, ill-cond.


def _metric_projector_batch(basis: np.ndarray) -> np.ndarray:
    gram = basis @ np.swapaxes(SIGNS * basis, -1, -2)
    coeff = np.linalg.solve(gram, basis * SIGNS)
    return np.swapaxes(basis, -1, -2) @ coeff


def interior_mask(shape, periodic_u: bool, periodic_theta: bool,
                  margin: int) -> np.ndarray:
    """True away from open-grid edges, where one-sided stencils distort
    iterated derivatives (the stencil switch is an O(h^2) kink that second
    differences amplify to O(1))."""
    mask = np.ones(shape, dtype=bool)
    if margin <= 0:
        return mask
    if not periodic_u and shape[0] > 2 * margin:
        mask[:margin] = False
        mask[-margin:] = False
    if not periodic_theta and shape[1] > 2 * margin:
        mask[:, :margin] = False
        mask[:, -margin:] = False
    return mask


def lie_cyclide_split(grid: LegendreGrid, data: Optional[CurvatureData] = None,
                      umbilic_tol: float = 1e-6, cond_tol: float = 1e-3,
                      edge_margin: int = 6) -> LieCyclideSplit:
    if data is None:
        data = curvature_data(grid, umbilic_tol=umbilic_tol)
    if bool(np.all(data.umbilic)):
        raise GeometryError("cyclide splitting undefined on a totally umbilic grid")

    d1s1, d2s1 = _second_directional_derivative(data.s1, data.dir2, grid)
    d1s2, d2s2 = _second_directional_derivative(data.s2, data.dir1, grid)
    s1_stack = np.stack([data.s1, d1s1, d2s1], axis=-2)
    s2_stack = np.stack([data.s2, d1s2, d2s2], axis=-2)

    def orthobasis(stack):
        _, svals, vt = np.linalg.svd(stack, full_matrices=False)
        return vt, svals

    b1, sv1 = orthobasis(s1_stack)
    b2_jet, sv2 = orthobasis(s2_stack)
    b2 = complement_rows(b1)

    gram1 = b1 @ np.swapaxes(SIGNS * b1, -1, -2)
    gram2 = b2_jet @ np.swapaxes(SIGNS * b2_jet, -1, -2)
    ev1 = np.linalg.eigvalsh(gram1)
    ev2 = np.linalg.eigvalsh(gram2)
    sig_ok = ((np.sum(ev1 > 1e-9, axis=-1) == 2) & (np.sum(ev1 < -1e-9, axis=-1) == 1)
              & (np.sum(ev2 > 1e-9, axis=-1) == 2) & (np.sum(ev2 < -1e-9, axis=-1) == 1))
    # splitting quality degrades where an osculating space nearly degenerates;
    # gate the diagnostics on the smaller of the two gram conditionings
    conditioning = np.minimum(np.min(np.abs(ev1), axis=-1),
                              np.min(np.abs(ev2), axis=-1))
    usable = (sig_ok & ~data.umbilic & (conditioning >= cond_tol)
              & interior_mask(grid.shape, grid.periodic_u,
                              grid.periodic_theta, edge_margin))

    cross = b1 @ np.swapaxes(SIGNS * b2, -1, -2)
    ortho = float(np.max(np.abs(cross[usable]))) if np.any(usable) else np.inf

    # geometric content: the complement is reproduced by the other family's
    # jet span (sine of the largest principal angle, O(h^2) on exact data)
    rej = b2_jet - (b2_jet @ np.swapaxes(b2, -1, -2)) @ b2
    sines = np.linalg.svd(rej, compute_uv=False)[..., 0]
    agreement = float(np.max(sines[usable])) if np.any(usable) else np.inf

    p1 = np.full(grid.shape + (DIM, DIM), np.nan)
    if np.any(usable):
        p1[usable] = _metric_projector_batch(b1[usable])
    p1_u = stencils.diff1(p1, grid.du, axis=0, periodic=grid.periodic_u)
    p1_t = stencils.diff1(p1, grid.dtheta, axis=1, periodic=grid.periodic_theta)
    eye = np.eye(DIM)
    n_u = (eye - 2.0 * p1) @ p1_u
    n_theta = (eye - 2.0 * p1) @ p1_t

    # defect of the splitting property: N should exchange the two blocks
    block = 0.0
    interior = (usable & ~np.isnan(n_u).any(axis=(-1, -2))
                & ~np.isnan(n_theta).any(axis=(-1, -2)))
    if np.any(interior):
        for n in (n_u, n_theta):
            nd = n[interior]
            pp = p1[interior]
            qq = eye - pp
            block = max(block,
                        float(np.max(np.abs(pp @ nd @ pp))),
                        float(np.max(np.abs(qq @ nd @ qq))))
    return LieCyclideSplit(
        s1_basis=b1, s2_basis=b2, s2_jet_basis=b2_jet,
        n_u=n_u, n_theta=n_theta,
        signature_ok=sig_ok, conditioning=conditioning,
        orthogonality=ortho, s2_agreement=agreement, block_defect=block,
        excluded=~usable,
    )


# ---------------------------------------------------------------------------
# channel detection
# ---------------------------------------------------------------------------

@dataclass
class ChannelReport:
    circular_dir: str             # 'none' | 'dir1' | 'dir2' | 'both'
    rates: dict                   # projective variation rate per direction
    coupling: dict                # |N(dir_i)| per direction
    tol_rate: float
    tol_coupling: float
    consistent: bool              # the two criteria agree
    notes: list

    def circular(self, which: str) -> bool:
        return self.circular_dir in (which, "both")


def _variation_rate(field: np.ndarray, direction: np.ndarray,
                    grid: LegendreGrid, mask: np.ndarray) -> float:
    """Max projective speed of a unit field along a direction field."""
    dv = _directional_derivative(field, direction, grid)
    dots = np.einsum("...d,...d->...", dv, field)
    rej = dv - dots[..., None] * field
    speed = np.linalg.norm(rej, axis=-1)
    good = ~mask
    return float(np.max(speed[good])) if np.any(good) else np.inf


def is_channel(grid: LegendreGrid, data: Optional[CurvatureData] = None,
               tol_rate: Optional[float] = None,
               tol_coupling: Optional[float] = None,
               umbilic_tol: float = 1e-6,
               edge_margin: int = 4) -> ChannelReport:
    """Decide along which curvature directions the curvature spheres freeze.

    Primary criterion: the projective variation rate of s_i along its own
    curvature direction.  Cross-check: the corresponding component of the
    splitting tensor N must vanish too.  Disagreement is flagged (not raised)
    since it indicates the grid is too coarse to classify.
    """
    if data is None:
        data = curvature_data(grid, umbilic_tol=umbilic_tol)
    h2 = grid.du ** 2 + grid.dtheta ** 2
    if tol_rate is None:
        tol_rate = max(1e-6, 1.0 * h2)
    if tol_coupling is None:
        tol_coupling = max(1e-6, 5.0 * h2)

    notes = []
    mask = data.umbilic | ~interior_mask(grid.shape, grid.periodic_u,
                                         grid.periodic_theta, edge_margin)
    rate1 = _variation_rate(data.s1, data.dir1, grid, mask)
    rate2 = _variation_rate(data.s2, data.dir2, grid, mask)

    split = None
    coup1 = coup2 = np.nan
    try:
        split = lie_cyclide_split(grid, data, umbilic_tol=umbilic_tol)
    except GeometryError as exc:
        notes.append(f"splitting unavailable: {exc}")
    if split is not None:
        good = (~split.excluded
                & ~np.isnan(split.n_u).any(axis=(-1, -2))
                & ~np.isnan(split.n_theta).any(axis=(-1, -2)))
        if np.any(good):
            def coupling(direction):
                n_dir = (direction[..., 0, None, None] * split.n_u
                         + direction[..., 1, None, None] * split.n_theta)
                return float(np.max(np.abs(n_dir[good])))
            coup1 = coupling(data.dir1)
            coup2 = coupling(data.dir2)

    circ1 = rate1 <= tol_rate
    circ2 = rate2 <= tol_rate
    consistent = True
    for circ, coup, name in ((circ1, coup1, "dir1"), (circ2, coup2, "dir2")):
        if not np.isnan(coup) and circ != (coup <= tol_coupling):
            consistent = False
            notes.append(
                f"criteria disagree along {name}: rate vs coupling "
                f"({'circular' if circ else 'non-circular'} vs {coup:.3e})")

    circular_dir = {(False, False): "none", (True, False): "dir1",
                    (False, True): "dir2", (True, True): "both"}[(circ1, circ2)]
    return ChannelReport(
        circular_dir=circular_dir,
        rates={"dir1": rate1, "dir2": rate2},
        coupling={"dir1": coup1, "dir2": coup2},
        tol_rate=tol_rate, tol_coupling=tol_coupling,
        consistent=consistent, notes=notes,
    )


# ---------------------------------------------------------------------------
# spherical parameter lines
# ---------------------------------------------------------------------------

def spherical_line_residual(grid: LegendreGrid, axis: str, index: int):
    """How close a parameter line's points come to lying on one sphere.

    Planes count as spheres here (infinite radius), so planar lines also
    report a near-zero residual; and when the line is a circle the
    minimiser is just one member of the pencil of spheres through it.

    Returns (residual, sphere_vector).  A point lift pairs to zero with a
    sphere's radius slot, so the fit runs over the five effective
    coordinates; the radius is recovered afterwards from the lightcone
    condition (its orientation is not determined by the fit, the
    nonnegative root is returned).
    """
    from .mesh import point_sphere_of  # local import to keep layering simple

    if axis not in ("u", "theta"):
        raise ValueError("axis must be 'u' or 'theta'")
    nu, nt = grid.shape
    count = nt if axis == "u" else nu
    rows = []
    for k in range(count):
        i, j = (index, k) if axis == "u" else (k, index)
        vec = point_sphere_of(grid.sigma[i, j], grid.tau[i, j])
        if vec is not None:
            rows.append(vec / np.linalg.norm(vec))
    if len(rows) < 6:
        raise GeometryError("not enough finite points on the parameter line")
    mat = (np.asarray(rows) * SIGNS)[:, :5]
    u_, svals, vt = np.linalg.svd(mat, full_matrices=False)
    v = vt[-1]
    r_sq = v[0] ** 2 + v[1] ** 2 + v[2] ** 2 + v[3] ** 2 - v[4] ** 2
    sphere = np.append(v, np.sqrt(max(r_sq, 0.0)))
    return float(svals[-1]), sphere
