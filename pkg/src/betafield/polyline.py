"""Rectifiable test curves as polylines, with exact ball clipping.

Ball/segment intersections are solved per segment via the quadratic, so
membership queries (does the curve meet this ball?) never depend on a
sampling step.  Distance from a point on a segment to an affine line is a
convex function of the parameter, so suprema of line-distances over the
clipped curve are exact maxima over clip endpoints.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def exact_diameter(points: np.ndarray) -> float:
    """Exact max pairwise distance; hull-reduced in 2d, chunked scan above."""
    v = np.atleast_2d(np.asarray(points, dtype=float))
    if len(v) < 2:
        return 0.0
    if v.shape[1] == 2 and len(v) > 16:
        from scipy.spatial import ConvexHull, QhullError

        try:
            v = v[ConvexHull(v).vertices]
        except QhullError:
            pass  # degenerate input; scan everything
    best = 0.0
    for i in range(0, len(v), 512):
        chunk = v[i : i + 512]
        d2 = ((chunk[:, None, :] - v[None, :, :]) ** 2).sum(axis=2)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


class Polyline:
    """Ordered vertex chain; consecutive duplicate vertices are forbidden."""

    def __init__(self, vertices):
        v = np.ascontiguousarray(np.atleast_2d(vertices), dtype=float)
        if v.shape[0] < 1:
            raise ValueError("polyline needs at least one vertex")
        if v.shape[0] > 1:
            seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
            if np.any(seg == 0):
                raise ValueError("consecutive duplicate vertices")
        self.vertices = v
        self.vertices.setflags(write=False)
        if len(v) > 1:
            self._seglen = np.linalg.norm(np.diff(v, axis=0), axis=1)
            self.cumlen = np.concatenate([[0.0], np.cumsum(self._seglen)])
        else:
            self._seglen = np.zeros(0)
            self.cumlen = np.zeros(1)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_segments(self) -> int:
        return max(len(self.vertices) - 1, 0)

    @property
    def length(self) -> float:
        return float(self.cumlen[-1])

    def diameter(self) -> float:
        return exact_diameter(self.vertices)

    def point_at(self, s: float) -> np.ndarray:
        """Point at arclength s (clamped to the curve)."""
        s = min(max(s, 0.0), self.length)
        if self.n_segments == 0:
            return self.vertices[0]
        i = int(np.searchsorted(self.cumlen, s, side="right")) - 1
        i = min(i, self.n_segments - 1)
        t = (s - self.cumlen[i]) / self._seglen[i]
        return self.vertices[i] + t * (self.vertices[i + 1] - self.vertices[i])

    def arc_samples(self, step: float) -> np.ndarray:
        """Points along the curve at arc spacing <= step (vertices are not
        necessarily included; endpoints are)."""
        if self.n_segments == 0:
            return self.vertices.copy()
        n = max(int(np.ceil(self.length / step)), 1)
        s = np.linspace(0.0, self.length, n + 1)
        i = np.clip(np.searchsorted(self.cumlen, s, side="right") - 1, 0, self.n_segments - 1)
        t = (s - self.cumlen[i]) / self._seglen[i]
        return self.vertices[i] + t[:, None] * (self.vertices[i + 1] - self.vertices[i])

    def _segment_ball_params(self, center, radius):
        """Per segment, the [t0, t1] subinterval of [0,1] inside the ball.

        Returns (idx, t0, t1) arrays for segments with nonempty intersection.
        """
        v = self.vertices
        if self.n_segments == 0:
            d = np.linalg.norm(v[0] - center)
            if d <= radius:
                return np.array([0]), np.array([0.0]), np.array([0.0])
            return np.zeros(0, dtype=int), np.zeros(0), np.zeros(0)
        a = v[:-1]
        d = v[1:] - a
        f = a - np.asarray(center, dtype=float)
        A = (d * d).sum(axis=1)
        Bq = 2.0 * (f * d).sum(axis=1)
        Cq = (f * f).sum(axis=1) - radius * radius
        disc = Bq * Bq - 4.0 * A * Cq
        ok = disc >= 0
        idx = np.nonzero(ok)[0]
        if len(idx) == 0:
            return idx, np.zeros(0), np.zeros(0)
        sq = np.sqrt(disc[idx])
        t0 = (-Bq[idx] - sq) / (2.0 * A[idx])
        t1 = (-Bq[idx] + sq) / (2.0 * A[idx])
        t0c = np.clip(t0, 0.0, 1.0)
        t1c = np.clip(t1, 0.0, 1.0)
        nonempty = t0c <= t1c
        # the clipped interval is valid only if it actually intersects [0,1]
        nonempty &= (t1 >= 0.0) & (t0 <= 1.0)
        return idx[nonempty], t0c[nonempty], t1c[nonempty]

    def intersects_ball(self, center, radius: float) -> bool:
        idx, _, _ = self._segment_ball_params(center, radius)
        return len(idx) > 0

    def clip_to_ball(self, center, radius: float) -> np.ndarray:
        """Endpoints of the maximal sub-segments inside the ball: (m, 2, n)."""
        idx, t0, t1 = self._segment_ball_params(center, radius)
        if len(idx) == 0:
            return np.zeros((0, 2, self.dim))
        if self.n_segments == 0:
            return np.stack([self.vertices, self.vertices], axis=1)
        a = self.vertices[idx]
        d = self.vertices[idx + 1] - a
        p0 = a + t0[:, None] * d
        p1 = a + t1[:, None] * d
        return np.stack([p0, p1], axis=1)

    def clip_endpoints(self, center, radius: float) -> np.ndarray:
        """Flat (2m, n) array of clip endpoints inside the ball."""
        pieces = self.clip_to_ball(center, radius)
        return pieces.reshape(-1, self.dim)

    def sample_in_ball(self, center, radius: float, step: float) -> np.ndarray:
        """Sample of the curve inside the ball at arc spacing <= step,
        always including clip endpoints."""
        pieces = self.clip_to_ball(center, radius)
        if len(pieces) == 0:
            return np.zeros((0, self.dim))
        out = []
        for p0, p1 in pieces:
            seg = np.linalg.norm(p1 - p0)
            n = max(int(np.ceil(seg / step)), 1)
            t = np.linspace(0.0, 1.0, n + 1)
            out.append(p0 + t[:, None] * (p1 - p0))
        return np.vstack(out)

    def dists(self, queries) -> np.ndarray:
        """Exact distances from query points to the polyline."""
        return kernels.polyline_min_dists(np.atleast_2d(queries), self.vertices)

    def segment_bucket_index(self, cell: float) -> "SegmentBuckets":
        return SegmentBuckets(self, cell)


class SegmentBuckets:
    """Grid-bucket index over polyline segments for local clipping.

    candidates(center, r) returns segment indices whose bounding boxes meet
    the ball's bounding box; exactness is preserved because callers re-test
    with the quadratic.
    """

    def __init__(self, poly: Polyline, cell: float):
        self.poly = poly
        self.cell = cell
        self.buckets: dict[tuple, list[int]] = {}
        v = poly.vertices
        if poly.n_segments == 0:
            key = tuple((v[0] // cell).astype(np.int64))
            self.buckets[key] = [0]
            return
        lo = np.minimum(v[:-1], v[1:])
        hi = np.maximum(v[:-1], v[1:])
        for s in range(poly.n_segments):
            c0 = (lo[s] // cell).astype(np.int64)
            c1 = (hi[s] // cell).astype(np.int64)
            for key in np.ndindex(*(c1 - c0 + 1)):
                self.buckets.setdefault(tuple(c0 + np.asarray(key)), []).append(s)

    def candidates(self, center, radius: float) -> np.ndarray:
        c = np.asarray(center, dtype=float)
        c0 = ((c - radius) // self.cell).astype(np.int64)
        c1 = ((c + radius) // self.cell).astype(np.int64)
        seen: set[int] = set()
        for key in np.ndindex(*(c1 - c0 + 1)):
            seen.update(self.buckets.get(tuple(c0 + np.asarray(key)), ()))
        return np.asarray(sorted(seen), dtype=np.intp)

    def clip_to_ball(self, center, radius: float) -> np.ndarray:
        """Like Polyline.clip_to_ball but restricted to candidate segments."""
        cand = self.candidates(center, radius)
        if len(cand) == 0:
            return np.zeros((0, 2, self.poly.dim))
        v = self.poly.vertices
        if self.poly.n_segments == 0:
            d = np.linalg.norm(v[0] - center)
            if d <= radius:
                return np.stack([v, v], axis=1)
            return np.zeros((0, 2, self.poly.dim))
        a = v[cand]
        b = v[cand + 1]
        return _clip_segments(a, b, np.asarray(center, dtype=float), radius)


def _clip_segments(a: np.ndarray, b: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    d = b - a
    f = a - center
    A = (d * d).sum(axis=1)
    Bq = 2.0 * (f * d).sum(axis=1)
    Cq = (f * f).sum(axis=1) - radius * radius
    disc = Bq * Bq - 4.0 * A * Cq
    ok = disc >= 0
    idx = np.nonzero(ok)[0]
    if len(idx) == 0:
        return np.zeros((0, 2, a.shape[1]))
    sq = np.sqrt(disc[idx])
    t0 = (-Bq[idx] - sq) / (2.0 * A[idx])
    t1 = (-Bq[idx] + sq) / (2.0 * A[idx])
    keep = (t1 >= 0.0) & (t0 <= 1.0)
    idx, t0, t1 = idx[keep], np.clip(t0[keep], 0, 1), np.clip(t1[keep], 0, 1)
    p0 = a[idx] + t0[:, None] * (b[idx] - a[idx])
    p1 = a[idx] + t1[:, None] * (b[idx] - a[idx])
    return np.stack([p0, p1], axis=1)
