"""NumPy reference implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available.  Signatures and semantics are identical to ``_core``; the
compiled module is just faster.  Keep both in sync — ``tests/test_kernels``
checks them against each other.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def greedy_net(points: np.ndarray, seeds: np.ndarray, delta: float) -> np.ndarray:
    """Greedy maximal delta-separated subset of `points`, seeded by `seeds`.

    Scans points in index order and keeps those at distance >= delta from
    everything already kept.  Returns kept indices (seeds first).  Uses a
    cell hash at cell size delta so only nearby kept points are examined.
    """
    pts = np.ascontiguousarray(points, dtype=float)
    n, dim = pts.shape
    seeds = np.asarray(seeds, dtype=np.intp)
    if dim > 4:
        return _greedy_net_brute(pts, seeds, delta)
    kept: list[int] = []
    cells: dict[tuple, list[int]] = {}
    inv = 1.0 / delta

    def cell_of(p):
        return tuple((p * inv).astype(np.int64))

    def is_far(p) -> bool:
        base = (p * inv).astype(np.int64)
        for off in np.ndindex(*([3] * dim)):
            key = tuple(base + np.asarray(off) - 1)
            bucket = cells.get(key)
            if bucket:
                q = pts[bucket]
                if np.min(np.einsum("ij,ij->i", q - p, q - p)) < delta * delta:
                    return False
        return True

    def add(i):
        kept.append(i)
        cells.setdefault(cell_of(pts[i]), []).append(i)

    for i in seeds:
        add(int(i))
    seed_set = set(int(i) for i in seeds)
    for i in range(n):
        if i in seed_set:
            continue
        p = pts[i]
        base = (p * inv).astype(np.int64)
        ok = True
        for off in np.ndindex(*([3] * dim)):
            key = tuple(base + np.asarray(off) - 1)
            bucket = cells.get(key)
            if bucket:
                q = pts[bucket]
                d2 = np.einsum("ij,ij->i", q - p, q - p)
                if np.min(d2) < delta * delta:
                    ok = False
                    break
        if ok:
            add(i)
    return np.asarray(kept, dtype=np.intp)


def _greedy_net_brute(pts: np.ndarray, seeds: np.ndarray, delta: float) -> np.ndarray:
    kept = list(int(i) for i in seeds)
    seed_set = set(kept)
    d2min = delta * delta
    for i in range(len(pts)):
        if i in seed_set:
            continue
        if kept:
            d2 = ((pts[kept] - pts[i]) ** 2).sum(axis=1)
            if d2.min() < d2min:
                continue
        kept.append(i)
    return np.asarray(kept, dtype=np.intp)


def min_dists(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Per-query distance to the nearest row of `points` (brute force)."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    p = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(q))
    block = max(1, int(4e6 // max(len(p), 1)))
    for i in range(0, len(q), block):
        chunk = q[i : i + block]
        d2 = ((chunk[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
        out[i : i + block] = np.sqrt(d2.min(axis=1))
    return out


def sup_min_dist(queries: np.ndarray, points: np.ndarray, stop_above: float = np.inf) -> float:
    """max over queries of min-distance to `points`; may return early with
    any value > stop_above once the sup provably exceeds it."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    p = np.atleast_2d(np.asarray(points, dtype=float))
    best = 0.0
    block = max(1, int(4e6 // max(len(p), 1)))
    for i in range(0, len(q), block):
        chunk = q[i : i + block]
        d2 = ((chunk[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
        best = max(best, float(np.sqrt(d2.min(axis=1).max())))
        if best > stop_above:
            return best
    return best


def sup_dist_to_line(points: np.ndarray, anchor: np.ndarray, direction: np.ndarray) -> float:
    """sup over rows of `points` of the distance to the line anchor + t*direction."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    r = pts - np.asarray(anchor, dtype=float)
    r = r - np.outer(r @ u, u)
    return float(np.sqrt((r * r).sum(axis=1).max())) if len(r) else 0.0


def proj_minmax(points: np.ndarray, direction: np.ndarray) -> tuple[float, float]:
    """(min, max) of projections of `points` onto `direction` (unit-normalized)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    t = pts @ u
    return float(t.min()), float(t.max())


def meb(points: np.ndarray, iters: int = 200) -> tuple[np.ndarray, float]:
    """Approximate minimum enclosing ball (Badoiu-Clarkson core-set walk).

    Returns (center, radius) with radius a certified enclosing radius (the
    true max distance from the returned center).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) == 0:
        raise ValueError("meb of empty set")
    c = pts.mean(axis=0)
    for k in range(1, iters + 1):
        d2 = ((pts - c) ** 2).sum(axis=1)
        far = int(np.argmax(d2))
        c = c + (pts[far] - c) / (k + 1.0)
    r = float(np.sqrt(((pts - c) ** 2).sum(axis=1).max()))
    return c, r


def polyline_min_dists(queries: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Per-query distance to a polyline with the given vertex array."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    v = np.atleast_2d(np.asarray(verts, dtype=float))
    if len(v) == 1:
        return np.linalg.norm(q - v[0], axis=1)
    a = v[:-1]
    ab = v[1:] - a
    ab2 = (ab * ab).sum(axis=1)
    ab2[ab2 == 0] = 1.0
    out = np.empty(len(q))
    block = max(1, int(2e6 // max(len(a), 1)))
    for i in range(0, len(q), block):
        chunk = q[i : i + block]
        t = ((chunk[:, None, :] - a[None, :, :]) * ab[None, :, :]).sum(axis=2) / ab2[None, :]
        t = np.clip(t, 0.0, 1.0)
        closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d2 = ((chunk[:, None, :] - closest) ** 2).sum(axis=2)
        out[i : i + block] = np.sqrt(d2.min(axis=1))
    return out


def segments_min_dists(queries: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-query distance to a SET of segments [a_i, b_i] (no chaining)."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    ab = b - a
    ab2 = (ab * ab).sum(axis=1)
    ab2s = np.where(ab2 == 0, 1.0, ab2)
    t = ((q[:, None, :] - a[None, :, :]) * ab[None, :, :]).sum(axis=2) / ab2s[None, :]
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d2 = ((q[:, None, :] - closest) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


def pairwise_min_gap(points: np.ndarray) -> float:
    """Smallest nonzero pairwise distance (grid-accelerated would be nicer;
    the fallback uses a KD-tree from scipy)."""
    from scipy.spatial import cKDTree

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 2:
        return np.inf
    d, _ = cKDTree(pts).query(pts, k=2)
    gaps = d[:, 1]
    gaps = gaps[gaps > 0]
    return float(gaps.min()) if len(gaps) else 0.0


def best_near_pair(
    points: np.ndarray, center: np.ndarray, sep_min: float
) -> tuple[int, int]:
    """Pair (i, j) with |p_i - p_j| >= sep_min minimizing max(|p_i-c|, |p_j-c|).

    Ties break on the smaller (i, j) after sorting candidates by distance to
    the center.  Returns (-1, -1) when no pair qualifies.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 2:
        return (-1, -1)
    c = np.asarray(center, dtype=float)
    dc = np.linalg.norm(pts - c, axis=1)
    order = np.lexsort((np.arange(len(pts)), dc))
    s2 = sep_min * sep_min
    # scan pairs in increasing outer radius; the first hit is optimal
    for b in range(1, len(order)):
        jb = order[b]
        rest = order[:b]
        diff = pts[rest] - pts[jb]
        ok = np.nonzero((diff * diff).sum(axis=1) >= s2)[0]
        if len(ok):
            ia = rest[ok[0]]
            i, j = int(min(ia, jb)), int(max(ia, jb))
            return (i, j)
    return (-1, -1)


def nearest_index(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index of the nearest row of `points` per query (ties -> lowest index)."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    p = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(q), dtype=np.intp)
    block = max(1, int(4e6 // max(len(p), 1)))
    for i in range(0, len(q), block):
        chunk = q[i : i + block]
        d2 = ((chunk[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
        out[i : i + block] = d2.argmin(axis=1)
    return out
