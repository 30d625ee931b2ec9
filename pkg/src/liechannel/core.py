"""Linear algebra of the hexaspherical sphere model.

Oriented spheres, planes and points of Euclidean 3-space are encoded as null
lines of R^{4,2}, the 6-dimensional real vector space carrying the inner
product

    (x, y) = x1*y1 + x2*y2 + x3*y3 + x4*y4 - x5*y5 - x6*y6.

Two oriented spheres are in oriented contact exactly when their null lifts are
orthogonal.  Everything in this module is plain numpy on shape-(6,) vectors
(or batches thereof); the classes are thin wrappers that carry validation and
projective comparison semantics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

#: diagonal of the metric, signature (4, 2)
SIGNS = np.array([1.0, 1.0, 1.0, 1.0, -1.0, -1.0])

#: metric as a matrix, for operator-level work
METRIC = np.diag(SIGNS)

DIM = 6


class GeometryError(ValueError):
    """Base class for geometric failures (degenerate input, wrong signature...)."""


class RankDeficiencyError(GeometryError):
    """Raised when a requested span drops rank."""

    def __init__(self, requested: int, achieved: int):
        self.requested = requested
        self.achieved = achieved
        super().__init__(
            f"span of {requested} vectors has rank {achieved}: input is "
            f"(numerically) linearly dependent"
        )


class SignatureError(GeometryError):
    """Raised when a subspace does not have the signature an operation needs."""


# ---------------------------------------------------------------------------
# inner product and normalisation helpers
# ---------------------------------------------------------------------------

def inner(a: np.ndarray, b: np.ndarray):
    """Indefinite inner product; broadcasts over leading axes."""
    return np.einsum("...i,...i->...", np.asarray(a), SIGNS * np.asarray(b))


def euclidean_normalise(v: np.ndarray) -> np.ndarray:
    """Scale (batches of) vectors to Euclidean norm 1."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise GeometryError("cannot normalise a zero vector")
    return v / n


def projective_gap(a: np.ndarray, b: np.ndarray):
    """Sine of the angle between the lines spanned by a and b.

    Computed as the norm of the rejection of one unit vector from the other,
    which stays accurate down to rounding level (unlike sqrt(1 - cos^2)).
    Broadcasts over leading axes.
    """
    ua = np.asarray(a) / np.linalg.norm(a, axis=-1, keepdims=True)
    ub = np.asarray(b) / np.linalg.norm(b, axis=-1, keepdims=True)
    dot = np.einsum("...i,...i->...", ua, ub)
    rej = ub - dot[..., None] * ua
    return np.linalg.norm(rej, axis=-1)


def align_signs_1d(samples: np.ndarray) -> np.ndarray:
    """Flip signs along the first axis so consecutive vectors correlate positively."""
    out = np.array(samples, dtype=float)
    for i in range(1, out.shape[0]):
        if np.dot(out[i], out[i - 1]) < 0.0:
            out[i] = -out[i]
    return out


# ---------------------------------------------------------------------------
# projective points and Euclidean readings
# ---------------------------------------------------------------------------

class LiePoint:
    """A point of the projective lightcone: an oriented sphere/plane/point.

    Wraps a nonzero null representative vector.  Comparison is projective
    (sign and scale insensitive).
    """

    __slots__ = ("vec",)

    def __init__(self, vec: np.ndarray, tol_null: float = 1e-9):
        vec = np.asarray(vec, dtype=float).reshape(DIM)
        scale = float(np.dot(vec, vec))
        if scale == 0.0:
            raise GeometryError("zero vector does not define a projective point")
        if abs(inner(vec, vec)) > tol_null * scale:
            raise GeometryError(
                f"representative is not null: (v,v) = {inner(vec, vec):.3e} "
                f"at Euclidean norm^2 {scale:.3e}"
            )
        self.vec = vec

    @property
    def unit(self) -> np.ndarray:
        return self.vec / np.linalg.norm(self.vec)

    def gap_to(self, other: "LiePoint") -> float:
        return float(projective_gap(self.vec, other.vec))

    def same_as(self, other: "LiePoint", tol: float = 1e-8) -> bool:
        return self.gap_to(other) <= tol

    def __repr__(self):
        return f"LiePoint({np.array2string(self.vec, precision=6)})"


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray
    offset: float


@dataclass(frozen=True)
class Point:
    position: np.ndarray


@dataclass(frozen=True)
class Infinity:
    pass


EuclideanObject = Union[Sphere, Plane, Point, Infinity]


def sphere_lift(center: Sequence[float], radius: float) -> np.ndarray:
    """Null lift of an oriented sphere (radius 0 gives a point sphere).

    Components: (c, (1 - |c|^2 + r^2)/2, (1 + |c|^2 - r^2)/2, r); the sum of
    the fourth and fifth components is the homogenising coordinate, fixed
    to 1 here.
    """
    c = np.asarray(center, dtype=float).reshape(3)
    r = float(radius)
    cc = float(np.dot(c, c))
    return np.array(
        [c[0], c[1], c[2], (1.0 - cc + r * r) / 2.0, (1.0 + cc - r * r) / 2.0, r]
    )


def point_lift(position: Sequence[float]) -> np.ndarray:
    return sphere_lift(position, 0.0)


def plane_lift(normal: Sequence[float], offset: float) -> np.ndarray:
    """Null lift of the oriented plane {x : x . n = d} with unit normal n."""
    n = np.asarray(normal, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise GeometryError("plane normal must be a unit vector")
    d = float(offset)
    return np.array([n[0], n[1], n[2], -d, d, 1.0])


INFINITY_VEC = np.array([0.0, 0.0, 0.0, -1.0, 1.0, 0.0])


def project_to_euclidean(p: Union[LiePoint, np.ndarray], tol: float = 1e-10) -> EuclideanObject:
    """Read a projective lightcone point back as a Euclidean sphere/plane/point.

    A representative with nonvanishing homogenising coordinate (x4 + x5) is a
    sphere (or a point if the signed radius vanishes); otherwise a
    nonvanishing sixth component marks a plane; otherwise the point at
    infinity.
    """
    v = p.vec if isinstance(p, LiePoint) else np.asarray(p, dtype=float)
    scale = np.linalg.norm(v)
    if scale == 0.0:
        raise GeometryError("zero vector")
    homog = v[3] + v[4]
    if abs(homog) > tol * scale:
        w = v / homog
        if abs(w[5]) <= tol:
            return Point(position=w[:3].copy())
        return Sphere(center=w[:3].copy(), radius=float(w[5]))
    if abs(v[5]) > tol * scale:
        w = v / v[5]
        return Plane(normal=w[:3].copy(), offset=float(-w[3]))
    return Infinity()


# ---------------------------------------------------------------------------
# skew operators: wedges, curly wedge, bracket of forms
# ---------------------------------------------------------------------------

class SkewMap:
    """A metric-skew endomorphism of R^{4,2} ((Av, w) = -(v, Aw))."""

    __slots__ = ("m",)

    def __init__(self, matrix: np.ndarray):
        self.m = np.asarray(matrix, dtype=float).reshape(DIM, DIM)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.m @ np.asarray(v, dtype=float)

    def skew_defect(self) -> float:
        """Max-abs entry of G A + A^T G; zero for exact metric skewness."""
        ga = METRIC @ self.m
        return float(np.max(np.abs(ga + ga.T)))

    def commutator(self, other: "SkewMap") -> "SkewMap":
        return SkewMap(self.m @ other.m - other.m @ self.m)

    def __add__(self, other):
        return SkewMap(self.m + other.m)

    def __sub__(self, other):
        return SkewMap(self.m - other.m)

    def __mul__(self, scalar):
        return SkewMap(self.m * float(scalar))

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.m, 2))

    def __repr__(self):
        return f"SkewMap(norm={np.linalg.norm(self.m):.3e})"


def wedge_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of v -> (a,v) b - (b,v) a; batched over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ga = SIGNS * a
    gb = SIGNS * b
    return b[..., :, None] * ga[..., None, :] - a[..., :, None] * gb[..., None, :]


def wedge(a: np.ndarray, b: np.ndarray) -> SkewMap:
    """The skew map identified with the 2-vector a ^ b."""
    return SkewMap(wedge_matrix(a, b))


def curly_wedge(w1_u, w1_t, w2_u, w2_t) -> SkewMap:
    """Symmetric product of two vector-valued 1-forms, evaluated on (du, dtheta).

    Inputs are the two components of each form; the result is the 2-form
    value  w1(du) ^ w2(dtheta) - w1(dtheta) ^ w2(du)  as a skew map.
    """
    return SkewMap(wedge_matrix(w1_u, w2_t) - wedge_matrix(w1_t, w2_u))


def form_bracket(a_u, a_t, b_u, b_t) -> SkewMap:
    """[A ^ B] on (du, dtheta) for skew-map-valued 1-forms A, B."""
    au, at = np.asarray(a_u), np.asarray(a_t)
    bu, bt = np.asarray(b_u), np.asarray(b_t)
    return SkewMap((au @ bt - bt @ au) - (at @ bu - bu @ at))


# ---------------------------------------------------------------------------
# subspaces
# ---------------------------------------------------------------------------

class Subspace:
    """A linear subspace of R^{4,2} with cached metric data.

    The stored basis rows are Euclidean-orthonormal (from an SVD), which keeps
    principal-angle computations stable; the metric enters through the Gram
    matrix.
    """

    __slots__ = ("basis", "_gram", "_signature")

    def __init__(self, basis: np.ndarray):
        self.basis = np.asarray(basis, dtype=float).reshape(-1, DIM)
        self._gram = None
        self._signature = None

    # -- construction ------------------------------------------------------

    @staticmethod
    def from_vectors(vectors: Iterable[np.ndarray], rank_tol: float = 1e-10) -> "Subspace":
        mat = np.asarray([np.asarray(v, dtype=float).reshape(DIM) for v in vectors])
        if mat.shape[0] == 0:
            return Subspace(np.zeros((0, DIM)))
        _, svals, vt = np.linalg.svd(mat, full_matrices=False)
        rank = int(np.sum(svals > rank_tol * svals[0])) if svals[0] > 0 else 0
        if rank < mat.shape[0]:
            raise RankDeficiencyError(mat.shape[0], rank)
        return Subspace(vt[:rank])

    # -- metric data --------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.basis @ (SIGNS * self.basis).T
        return self._gram

    @property
    def signature(self):
        """(n_plus, n_minus, n_zero) of the restricted metric."""
        if self._signature is None:
            if self.dim == 0:
                self._signature = (0, 0, 0)
            else:
                evals = np.linalg.eigvalsh(self.gram)
                # basis rows are Euclidean-orthonormal, so eigenvalues live in
                # [-1, 1]; the absolute floor catches totally degenerate spans
                zero_tol = max(1e-9 * float(np.max(np.abs(evals))), 1e-12)
                n_zero = int(np.sum(np.abs(evals) < zero_tol))
                n_plus = int(np.sum(evals >= zero_tol))
                self._signature = (n_plus, self.dim - n_plus - n_zero, n_zero)
        return self._signature

    # -- membership / projection -------------------------------------------

    def containment_gap(self, v: np.ndarray) -> float:
        """Sine of the angle between v and the subspace."""
        u = np.asarray(v, dtype=float)
        u = u / np.linalg.norm(u)
        rej = u - self.basis.T @ (self.basis @ u)
        return float(np.linalg.norm(rej))

    def contains(self, v: np.ndarray, tol: float = 1e-8) -> bool:
        return self.containment_gap(v) <= tol

    def metric_projector(self) -> np.ndarray:
        """Matrix of the metric-orthogonal projection onto the subspace.

        Requires a nondegenerate restricted metric.
        """
        if self.signature[2] != 0:
            raise SignatureError("metric projector needs a nondegenerate subspace")
        coeff = np.linalg.solve(self.gram, self.basis * SIGNS)
        return self.basis.T @ coeff

    def __repr__(self):
        return f"Subspace(dim={self.dim}, signature={self.signature})"


def span(vectors: Iterable[np.ndarray], rank_tol: float = 1e-10) -> Subspace:
    """Subspace spanned by the given vectors; raises if they are dependent."""
    return Subspace.from_vectors(vectors, rank_tol=rank_tol)


def orth_complement(s: Subspace) -> Subspace:
    """Metric-orthogonal complement, via the null space of B G."""
    if s.dim == 0:
        return Subspace(np.eye(DIM))
    _, _, vt = np.linalg.svd(s.basis * SIGNS, full_matrices=True)
    return Subspace(vt[s.dim:])


def complement_rows(rows: np.ndarray) -> np.ndarray:
    """Batched metric complement: rows (..., k, 6) -> (..., 6-k, 6)."""
    rows = np.asarray(rows, dtype=float)
    k = rows.shape[-2]
    _, _, vt = np.linalg.svd(rows * SIGNS, full_matrices=True)
    return vt[..., k:, :]


def subspace_intersect(s1: Subspace, s2: Subspace, tol: float = 1e-8) -> Subspace:
    """Intersection, from principal vectors with cosine within tol of 1."""
    if s1.dim == 0 or s2.dim == 0:
        return Subspace(np.zeros((0, DIM)))
    m = s1.basis @ s2.basis.T
    u, svals, _ = np.linalg.svd(m)
    keep = svals >= 1.0 - tol
    if not np.any(keep):
        return Subspace(np.zeros((0, DIM)))
    vecs = (u[:, : svals.size][:, keep]).T @ s1.basis
    return Subspace(euclidean_normalise(vecs))


def subspace_equal(s1: Subspace, s2: Subspace, tol: float = 1e-8):
    """(verdict, residual): residual is the sine of the largest principal angle.

    The sine is taken from the rejection of one basis off the other subspace,
    which is stable down to rounding level (sqrt(1 - cos^2) would floor out
    near sqrt(machine eps)).  Subspaces of different dimension are never
    equal; the residual is then 1.
    """
    if s1.dim != s2.dim:
        return False, 1.0
    if s1.dim == 0:
        return True, 0.0
    rej = s2.basis - (s2.basis @ s1.basis.T) @ s1.basis
    residual = float(np.linalg.svd(rej, compute_uv=False)[0])
    return residual <= tol, residual


# ---------------------------------------------------------------------------
# the circle's worth of null lines in a (2,1) subspace
# ---------------------------------------------------------------------------

def _canonical_sign(v: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(v)))
    return -v if v[idx] < 0 else v


def lightcone_frame(s: Subspace) -> np.ndarray:
    """Pseudo-orthonormal frame rows (E1, E2, E3) with squares (+1, +1, -1).

    Deterministic: eigenvectors of the Gram matrix sorted by descending
    eigenvalue, each sign-fixed by its largest-magnitude coefficient.
    """
    if s.dim != 3 or s.signature != (2, 1, 0):
        raise SignatureError(
            f"lightcone circle needs signature (2,1,0), got dim {s.dim} "
            f"signature {s.signature}"
        )
    evals, evecs = np.linalg.eigh(s.gram)
    order = np.argsort(evals)[::-1]  # two positive first, negative last
    frame = np.empty((3, DIM))
    for row, k in enumerate(order):
        coeff = _canonical_sign(evecs[:, k])
        frame[row] = (coeff @ s.basis) / np.sqrt(abs(evals[k]))
    return frame


def lightcone_circle(s: Subspace, theta) -> np.ndarray:
    """Null vectors cos(theta) E1 + sin(theta) E2 + E3 of a (2,1) subspace.

    theta may be a scalar or an array; the result has matching leading shape.
    """
    e1, e2, e3 = lightcone_frame(s)
    th = np.asarray(theta, dtype=float)
    return (
        np.cos(th)[..., None] * e1 + np.sin(th)[..., None] * e2 + e3
        if th.ndim
        else np.cos(th) * e1 + np.sin(th) * e2 + e3
    )


def circle_phase(frame: np.ndarray, v: np.ndarray) -> float:
    """Parameter theta with lightcone_circle point proportional to v.

    v must be a null vector of the frame's span; raises otherwise.
    """
    e1, e2, e3 = frame
    x = inner(v, e1)
    y = inner(v, e2)
    z = -inner(v, e3)
    if abs(z) < 1e-12 * np.linalg.norm(v):
        raise GeometryError("vector has no timelike component in this frame")
    return float(np.arctan2(y / z, x / z))


# ---------------------------------------------------------------------------
# radius shift
# ---------------------------------------------------------------------------

def parallel_transform_matrix(a: float) -> np.ndarray:
    """Linear map shifting every signed radius by a; metric-preserving."""
    a = float(a)
    m = np.eye(DIM)
    m[3, 3] += a * a / 2.0
    m[3, 4] = a * a / 2.0
    m[3, 5] = a
    m[4, 3] = -a * a / 2.0
    m[4, 4] -= a * a / 2.0
    m[4, 5] = -a
    m[5, 3] = a
    m[5, 4] = a
    return m


def parallel_transform(p: Union[LiePoint, np.ndarray], a: float):
    """Shift the signed radius of a sphere/plane by a (fixes centers/normals)."""
    m = parallel_transform_matrix(a)
    if isinstance(p, LiePoint):
        return LiePoint(m @ p.vec)
    return m @ np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# small dense matrix exponential (deterministic, numpy-only)
# ---------------------------------------------------------------------------

def expm(a: np.ndarray, terms: int = 16) -> np.ndarray:
    """Scaled Taylor matrix exponential for (batches of) small matrices."""
    a = np.asarray(a, dtype=float)
    nrm = float(np.max(np.abs(a).sum(axis=-1))) if a.size else 0.0
    k = max(0, int(np.ceil(np.log2(max(nrm, 1e-300) / 0.5))))
    b = a / (2.0 ** k)
    eye = np.broadcast_to(np.eye(a.shape[-1]), a.shape).copy()
    result = eye.copy()
    power = eye.copy()
    for j in range(1, terms):
        power = power @ b / j
        result = result + power
    for _ in range(k):
        result = result @ result
    return result
