"""Exact finite-dimensional linear algebra for subspaces, flats, and balls.

Everything here is a pure function of immutable inputs; the rest of the
package builds on these primitives.  Points are plain float64 numpy arrays
of a fixed ambient dimension n (2 <= n <= 16).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Orthonormality of subspace bases is enforced to this absolute tolerance.
ORTHO_TOL = 1e-12

MIN_DIM = 2
MAX_DIM = 16


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"point must be 1-d, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite entries")
    return p


def _orthonormalize(rows: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt, dropping rows that are dependent within tol."""
    out = []
    for r in np.atleast_2d(np.asarray(rows, dtype=float)):
        v = r.copy()
        for b in out:
            v -= np.dot(v, b) * b
        # second pass for numerical stability
        for b in out:
            v -= np.dot(v, b) * b
        norm = np.linalg.norm(v)
        if norm > tol * max(1.0, np.linalg.norm(r)):
            out.append(v / norm)
    if not out:
        return np.zeros((0, rows.shape[-1] if np.ndim(rows) == 2 else len(rows)))
    return np.array(out)


@dataclass(frozen=True)
class Subspace:
    """A linear subspace given by an orthonormal basis (rows of `basis`).

    dim 0 is allowed and represented by an empty (0, n) basis.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a (dim, n) array")
        object.__setattr__(self, "basis", b)
        b.setflags(write=False)
        if b.shape[0] > 0:
            g = b @ b.T
            if not np.allclose(g, np.eye(b.shape[0]), atol=ORTHO_TOL):
                raise ValueError("basis is not orthonormal within 1e-12")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of v onto the subspace."""
        if self.dim == 0:
            return np.zeros_like(v)
        return (np.asarray(v) @ self.basis.T) @ self.basis

    def contains_direction(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            return True
        return np.linalg.norm(v - self.project(v)) <= tol * n

    @staticmethod
    def from_vectors(vectors, ambient_dim: int | None = None) -> "Subspace":
        """Span of the given (not necessarily orthonormal) vectors."""
        arr = np.atleast_2d(np.asarray(vectors, dtype=float))
        if arr.size == 0:
            if ambient_dim is None:
                raise ValueError("need ambient_dim for an empty span")
            return Subspace(np.zeros((0, ambient_dim)))
        return Subspace(_orthonormalize(arr))

    @staticmethod
    def zero(ambient_dim: int) -> "Subspace":
        return Subspace(np.zeros((0, ambient_dim)))

    @staticmethod
    def axis(ambient_dim: int, *axes: int) -> "Subspace":
        b = np.zeros((len(axes), ambient_dim))
        for i, a in enumerate(axes):
            b[i, a] = 1.0
        return Subspace(b)


@dataclass(frozen=True)
class AffineFlat:
    """Affine flat `anchor + direction`, direction an orthonormal Subspace."""

    anchor: np.ndarray
    direction: Subspace

    def __post_init__(self):
        a = as_point(self.anchor)
        object.__setattr__(self, "anchor", a)
        a.setflags(write=False)
        if self.direction.ambient_dim != a.shape[0]:
            raise ValueError("anchor/direction ambient dimension mismatch")

    @property
    def dim(self) -> int:
        return self.direction.dim

    @property
    def ambient_dim(self) -> int:
        return self.anchor.shape[0]

    @staticmethod
    def line(anchor, direction) -> "AffineFlat":
        return AffineFlat(as_point(anchor), Subspace.from_vectors([direction]))


@dataclass(frozen=True)
class Ball:
    """Closed ball; by convention diam(B) := 2 * radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_point(self.center)
        object.__setattr__(self, "center", c)
        c.setflags(write=False)
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def diam(self) -> float:
        return 2.0 * self.radius

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius + slack


def angle(s1: Subspace, s2: Subspace) -> float:
    """One-sided angle from s1 to s2: sup over unit v in s1 of the angle to s2.

    Computed from principal angles: cos of the result is the smallest
    singular value of B2 B1^T (zero if dim s1 exceeds dim s2).
    """
    if s1.dim == 0:
        raise ValueError("undefined angle source")
    if s2.dim == 0:
        return np.pi / 2.0
    m = s2.basis @ s1.basis.T
    sv = np.linalg.svd(m, compute_uv=False)
    smin = sv.min() if s1.dim <= s2.dim else 0.0
    return float(np.arccos(np.clip(smin, -1.0, 1.0)))


def two_sided_angle(s1: Subspace, s2: Subspace) -> float:
    """Symmetric subspace distance: max of the two one-sided angles."""
    if s1.dim == 0 and s2.dim == 0:
        return 0.0
    if s1.dim == 0 or s2.dim == 0:
        return np.pi / 2.0
    return max(angle(s1, s2), angle(s2, s1))


def line_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Projective angle between two direction vectors, in [0, pi/2]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("zero direction")
    c = abs(np.dot(u, v)) / (nu * nv)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def dist_to_flat(p: np.ndarray, flat: AffineFlat) -> float:
    """Euclidean distance from p to the affine flat."""
    r = as_point(p) - flat.anchor
    return float(np.linalg.norm(r - flat.direction.project(r)))


def dists_to_flat(points: np.ndarray, flat: AffineFlat) -> np.ndarray:
    """Vectorized distances from rows of `points` to the flat."""
    r = np.atleast_2d(points) - flat.anchor
    if flat.dim > 0:
        r = r - (r @ flat.direction.basis.T) @ flat.direction.basis
    return np.linalg.norm(r, axis=1)


def span_join(s1: Subspace, s2: Subspace) -> Subspace:
    """Orthonormal basis of the span of s1 and s2 together."""
    if s1.ambient_dim != s2.ambient_dim:
        raise ValueError("ambient dimension mismatch")
    stacked = np.vstack([s1.basis, s2.basis])
    if stacked.shape[0] == 0:
        return Subspace.zero(s1.ambient_dim)
    return Subspace(_orthonormalize(stacked))


def flat_ball_sample(flat: AffineFlat, ball: Ball, spacing: float) -> np.ndarray:
    """Grid sample of the flat-ball intersection, covering radius <= spacing.

    Returns an (m, n) array; empty iff the flat misses the ball.  The grid is
    centered at the foot of the ball center on the flat, so the nearest point
    of the flat to the center is always included.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    k = flat.dim
    c = ball.center
    rel = c - flat.anchor
    if k == 0:
        d = float(np.linalg.norm(rel))
        if d <= ball.radius:
            return flat.anchor[None, :].copy()
        return np.zeros((0, flat.ambient_dim))
    foot = flat.anchor + flat.direction.project(rel)
    d = float(np.linalg.norm(foot - c))
    if d > ball.radius:
        return np.zeros((0, flat.ambient_dim))
    rho = float(np.sqrt(max(ball.radius**2 - d**2, 0.0)))
    # step = spacing gives in-flat covering radius spacing*sqrt(k)/2; shrink
    # for k > 4 so the covering radius stays <= spacing.
    step = spacing if k <= 4 else 2.0 * spacing / np.sqrt(k)
    m = int(np.floor(rho / step + 1e-9))
    ticks = np.arange(-m, m + 1) * step
    grids = np.meshgrid(*([ticks] * k), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    coords = coords[np.linalg.norm(coords, axis=1) <= rho + 1e-12]
    pts = foot + coords @ flat.direction.basis
    keep = np.linalg.norm(pts - c, axis=1) <= ball.radius + 1e-12
    return pts[keep]
