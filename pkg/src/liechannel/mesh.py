"""Point-sphere extraction and triangle-mesh export.

Every contact element contains exactly one point sphere (possibly the point
at infinity); evaluating it over a grid turns frame data back into an
ordinary surface mesh, written out as Wavefront OBJ with an optional CSV
sidecar for per-vertex scalars.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import GeometryError, Subspace, lightcone_circle, orth_complement


def point_sphere_of(sigma: np.ndarray, tau: np.ndarray,
                    tol: float = 1e-10) -> Optional[np.ndarray]:
    """The unique radius-zero member of the pencil spanned by two frames.

    Returns an (unnormalised) 6-vector, or None when that member is the
    point at infinity.  The combination kills the radius coordinate, so the
    weights are just the swapped last components.
    """
    sigma = np.asarray(sigma, dtype=float)
    tau = np.asarray(tau, dtype=float)
    a, b = -tau[5], sigma[5]
    if abs(a) < tol and abs(b) < tol:
        raise GeometryError("pencil is entirely made of point spheres")
    vec = a * sigma + b * tau
    denom = vec[3] + vec[4]
    if abs(denom) <= tol * np.linalg.norm(vec):
        return None
    return vec


def grid_point_spheres(sigma: np.ndarray, tau: np.ndarray, tol: float = 1e-10):
    """Batched point-sphere positions for a grid of contact elements.

    Returns (positions, finite) where positions has shape (..., 3) and
    finite marks elements whose point sphere is not the point at infinity
    (positions at masked-out samples are zero-filled).
    """
    sigma = np.asarray(sigma, dtype=float)
    tau = np.asarray(tau, dtype=float)
    a = -tau[..., 5:6]
    b = sigma[..., 5:6]
    vec = a * sigma + b * tau
    denom = vec[..., 3] + vec[..., 4]
    norm = np.linalg.norm(vec, axis=-1)
    finite = np.abs(denom) > tol * np.maximum(norm, 1e-300)
    safe = np.where(finite, denom, 1.0)
    positions = vec[..., :3] / safe[..., None]
    positions = np.where(finite[..., None], positions, 0.0)
    return positions, finite


@dataclass
class MeshOutput:
    """Triangle mesh with optional per-vertex scalar channels."""

    vertices: np.ndarray                    # (n, 3)
    faces: np.ndarray                       # (m, 3) int, zero-based
    scalars: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.faces = np.asarray(self.faces, dtype=int)


def triangulate_grid(shape, periodic_u: bool = False,
                     periodic_theta: bool = False) -> np.ndarray:
    """Row-major triangulation of a (nu, nt) grid of vertices.

    Each quad (i, j), (i+1, j), (i+1, j+1), (i, j+1) is split along the
    (i, j) -- (i+1, j+1) diagonal.  Periodic axes wrap their last strip.
    """
    nu, nt = shape
    idx = np.arange(nu * nt).reshape(nu, nt)
    i_count = nu if periodic_u else nu - 1
    j_count = nt if periodic_theta else nt - 1
    if i_count < 1 or j_count < 1:
        return np.zeros((0, 3), dtype=int)
    ii, jj = np.meshgrid(np.arange(i_count), np.arange(j_count), indexing="ij")
    i2 = (ii + 1) % nu
    j2 = (jj + 1) % nt
    v00 = idx[ii, jj]
    v10 = idx[i2, jj]
    v11 = idx[i2, j2]
    v01 = idx[ii, j2]
    tri1 = np.stack([v00, v10, v11], axis=-1).reshape(-1, 3)
    tri2 = np.stack([v00, v11, v01], axis=-1).reshape(-1, 3)
    faces = np.empty((tri1.shape[0] * 2, 3), dtype=int)
    faces[0::2] = tri1
    faces[1::2] = tri2
    return faces


def compact_mesh(vertices: np.ndarray, faces: np.ndarray, keep: np.ndarray,
                 scalars: Optional[dict] = None) -> MeshOutput:
    """Drop masked-out vertices, discard faces touching them, renumber."""
    scalars = scalars or {}
    keep = np.asarray(keep, dtype=bool)
    if keep.all():
        return MeshOutput(vertices, faces, dict(scalars))
    kept = np.flatnonzero(keep)
    remap = -np.ones(keep.size, dtype=int)
    remap[kept] = np.arange(kept.size)
    face_ok = keep[faces].all(axis=1)
    return MeshOutput(
        vertices=vertices[kept],
        faces=remap[faces[face_ok]],
        scalars={k: np.asarray(v)[kept] for k, v in scalars.items()},
    )


def mesh_from_frames(sigma: np.ndarray, tau: np.ndarray,
                     periodic_u: bool = False, periodic_theta: bool = False,
                     scalars: Optional[dict] = None) -> MeshOutput:
    """Point-sphere mesh of a frame grid, with infinite points removed."""
    positions, finite = grid_point_spheres(sigma, tau)
    nu, nt = positions.shape[:2]
    faces = triangulate_grid((nu, nt), periodic_u, periodic_theta)
    flat_scalars = {k: np.asarray(v, dtype=float).reshape(-1)
                    for k, v in (scalars or {}).items()}
    return compact_mesh(positions.reshape(-1, 3), faces,
                        finite.reshape(-1), flat_scalars)


def mesh_from_grid(grid, scalars: Optional[dict] = None) -> MeshOutput:
    """Convenience wrapper taking anything with sigma/tau/periodic flags."""
    return mesh_from_frames(grid.sigma, grid.tau, grid.periodic_u,
                            grid.periodic_theta, scalars)


def export_obj(mesh: MeshOutput, path) -> str:
    """Write a Wavefront OBJ file; scalar channels go to a CSV sidecar.

    Returns the OBJ path.  Floats are written with full repr precision so a
    reload reproduces the vertices bit for bit.
    """
    path = os.fspath(path)
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write("v {!r} {!r} {!r}\n".format(float(v[0]), float(v[1]),
                                                 float(v[2])))
        for f in mesh.faces:
            fh.write("f {} {} {}\n".format(int(f[0]) + 1, int(f[1]) + 1,
                                           int(f[2]) + 1))
    if mesh.scalars:
        sidecar = (path[:-4] if path.endswith(".obj") else path) + ".scalars.csv"
        names = sorted(mesh.scalars)
        with open(sidecar, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["vertex"] + names)
            for k in range(mesh.vertices.shape[0]):
                writer.writerow([k] + [repr(float(mesh.scalars[n][k]))
                                       for n in names])
    return path


def load_obj(path):
    """Minimal OBJ reader (v/f lines only), for round-trip checks."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=int)


def cyclide_point_grid(space: Subspace, n_a: int = 64, n_b: int = 64):
    """Sample a cyclide from its defining (2, 1) sphere space.

    The two one-parameter sphere families are the light cones of the space
    and of its orthogonal complement; each pair of members (one from each
    family) is automatically in oriented contact and their common point
    sphere sweeps out the surface.

    Returns (positions, finite, spheres_a, spheres_b, angles_a, angles_b).
    """
    if space.signature != (2, 1, 0):
        raise GeometryError(
            f"cyclide needs a (2,1) sphere space, got {space.signature}")
    comp = orth_complement(space)
    angles_a = np.linspace(0.0, 2.0 * np.pi, n_a, endpoint=False)
    angles_b = np.linspace(0.0, 2.0 * np.pi, n_b, endpoint=False)
    spheres_a = lightcone_circle(space, angles_a)
    spheres_b = lightcone_circle(comp, angles_b)
    sig = np.broadcast_to(spheres_a[:, None, :], (n_a, n_b, 6))
    tau = np.broadcast_to(spheres_b[None, :, :], (n_a, n_b, 6))
    positions, finite = grid_point_spheres(sig, tau)
    return positions, finite, spheres_a, spheres_b, angles_a, angles_b


def cyclide_mesh(space: Subspace, n_a: int = 64, n_b: int = 64) -> MeshOutput:
    """Triangle mesh of the cyclide carried by a (2, 1) sphere space."""
    positions, finite, *_ = cyclide_point_grid(space, n_a, n_b)
    faces = triangulate_grid((n_a, n_b), periodic_u=True, periodic_theta=True)
    return compact_mesh(positions.reshape(-1, 3), faces, finite.reshape(-1))
