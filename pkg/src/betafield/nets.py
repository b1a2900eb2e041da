"""Nested nets, multiresolution ball families, and Christ-style cube trees.

A ``PointSet`` is a finite sample of the underlying set E.  ``NetHierarchy``
holds nested maximal 2^-k-separated subsets (coarse levels are subsets of
fine ones); ``CubeTree`` arranges the net points of every other level into a
tree of "dyadic" cubes with measured inner/outer ball constants.

Build operations are deterministic given point order; built structures are
immutable in practice and safe to share across threads for queries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .geometry import Ball


class PointSet:
    """Finite point sample with an exact nearest-neighbor index."""

    def __init__(self, points, scale: float = 1.0):
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        if pts.shape[0] == 0:
            raise ValueError("empty point set")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        self.points = pts
        self.points.setflags(write=False)
        self.scale = float(scale)
        self._tree = None
        self._min_gap = None

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    @property
    def min_gap(self) -> float:
        """Smallest nonzero pairwise distance."""
        if self._min_gap is None:
            self._min_gap = kernels.pairwise_min_gap(self.points)
        return self._min_gap

    def diameter(self) -> float:
        """Exact diameter (hull-reduced in 2d, chunked exact scan otherwise)."""
        from .polyline import exact_diameter

        return exact_diameter(self.points)

    def nearest_dists(self, queries) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        d, _ = self.tree.query(q)
        return np.atleast_1d(d)

    def ball_indices(self, center, radius: float) -> np.ndarray:
        out = np.asarray(
            self.tree.query_ball_point(np.asarray(center, dtype=float), radius),
            dtype=np.intp,
        )
        out.sort()
        return out


def dist_to_E(p, E: PointSet) -> float:
    """Exact distance from p to the sample of E."""
    return float(E.nearest_dists(np.asarray(p, dtype=float)[None, :])[0])


def nearest_assign(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Nearest-point index per query with the lowest-index tie break.

    KD-accelerated; exact ties (within 1e-12 relative) are resolved by
    scanning everything at the tied distance.
    """
    queries = np.atleast_2d(queries)
    points = np.atleast_2d(points)
    if len(points) == 1:
        return np.zeros(len(queries), dtype=np.intp)
    t = cKDTree(points)
    d, nn = t.query(queries, k=2)
    out = np.asarray(nn[:, 0], dtype=np.intp)
    tied = d[:, 1] <= d[:, 0] * (1 + 1e-12) + 1e-300
    for i in np.nonzero(tied)[0]:
        cand = t.query_ball_point(queries[i], d[i, 0] * (1 + 1e-12) + 1e-300)
        out[i] = min(cand)
    return out


@dataclass
class NetHierarchy:
    """Nested 2^-k nets: levels[k] are point indices, coarse inside fine."""

    pointset: PointSet
    k_min: int
    k_max: int
    levels: dict[int, np.ndarray] = field(default_factory=dict)
    parents: dict[int, np.ndarray] = field(default_factory=dict)

    def separation(self, k: int) -> float:
        return self.pointset.scale * 2.0 ** (-k)

    def level_points(self, k: int) -> np.ndarray:
        return self.pointset.points[self.levels[k]]


def build_nested_nets(E: PointSet, k_min: int, k_max: int) -> NetHierarchy:
    """Greedy maximal-separation nets, coarse to fine, nested by seeding.

    A point is kept when its distance to everything already kept is >= the
    level separation (ties at exactly the separation are kept).
    """
    if k_min > k_max:
        raise ValueError("k_min must be <= k_max")
    h = NetHierarchy(E, k_min, k_max)
    prev = np.zeros(0, dtype=np.intp)
    all_idx = np.arange(len(E), dtype=np.intp)
    for k in range(k_min, k_max + 1):
        delta = h.separation(k)
        if delta <= E.min_gap:
            # every point qualifies; greedy would keep them all
            rest = all_idx[~np.isin(all_idx, prev)]
            kept = np.concatenate([prev, rest])
        else:
            kept = kernels.greedy_net(E.points, prev, delta)
        h.levels[k] = kept
        if k > k_min:
            parent_pos = nearest_assign(E.points[kept], E.points[prev])
            h.parents[k] = prev[parent_pos]
        prev = kept
    return h


@dataclass(frozen=True)
class FamilyBall:
    """One ball of a multiresolution family, with its provenance."""

    center: np.ndarray
    radius: float
    level: int
    point_index: int
    ball_id: int

    @property
    def diam(self) -> float:
        return 2.0 * self.radius

    def as_ball(self) -> Ball:
        return Ball(self.center, self.radius)


class BallFamily:
    """Multiresolution family B(z, 2 * 2^-k * scale) over the net hierarchy.

    Sequence of FamilyBall; also exposes per-level center arrays for the
    vectorized scan paths.
    """

    def __init__(self, hierarchy: NetHierarchy):
        self.hierarchy = hierarchy
        self.levels = sorted(hierarchy.levels)
        self._offsets = {}
        self._trees: dict[int, cKDTree] = {}
        count = 0
        for k in self.levels:
            self._offsets[k] = count
            count += len(hierarchy.levels[k])
        self._count = count

    def radius(self, k: int) -> float:
        return 2.0 * self.hierarchy.separation(k)

    def level_tree(self, k: int) -> cKDTree:
        if k not in self._trees:
            self._trees[k] = cKDTree(self.level_centers(k))
        return self._trees[k]

    def level_centers(self, k: int) -> np.ndarray:
        return self.hierarchy.level_points(k)

    def level_indices(self, k: int) -> np.ndarray:
        return self.hierarchy.levels[k]

    def __len__(self) -> int:
        return self._count

    def __iter__(self):
        for k in self.levels:
            idx = self.hierarchy.levels[k]
            pts = self.hierarchy.pointset.points
            r = self.radius(k)
            base = self._offsets[k]
            for j, pi in enumerate(idx):
                yield FamilyBall(pts[pi], r, k, int(pi), base + j)


def multiresolution_family(h: NetHierarchy) -> BallFamily:
    return BallFamily(h)


class CubeTree:
    """Christ-style cube tree built on a net hierarchy.

    Cube level j uses the net at scale s^j (s = 2^-p); each finer center is
    assigned to its nearest center one level up, E points are assigned to
    the nearest finest-level center, and membership is the closure of the
    chains.  The inner/outer constants a0 and C1 are measured, not assumed.
    """

    def __init__(self, s: float, scale: float, k0: int):
        self.s = s
        self.scale = scale
        self.k0 = k0
        self.level_of = np.zeros(0, dtype=np.intp)
        self.center_idx = np.zeros(0, dtype=np.intp)
        self.parent = np.zeros(0, dtype=np.intp)
        self.children: list[list[int]] = []
        self.level_slices: dict[int, slice] = {}
        self.centers = np.zeros((0, 0))
        self.a0 = np.nan
        self.C1 = np.nan
        self.pointset: PointSet | None = None
        # per level: (order, offsets, cube ids in level order) for membership
        self._members: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._assign: dict[int, np.ndarray] = {}
        self._level_trees: dict[int, cKDTree] = {}

    def level_tree(self, j: int) -> cKDTree:
        if j not in self._level_trees:
            self._level_trees[j] = cKDTree(self.centers[self.level_slices[j]])
        return self._level_trees[j]

    @property
    def n_cubes(self) -> int:
        return len(self.level_of)

    @property
    def n_levels(self) -> int:
        return len(self.level_slices)

    def cube_scale(self, j: int) -> float:
        return self.scale * 2.0 ** (-self.k0) * self.s**j

    def ball_radius(self, j: int) -> float:
        return self.C1 * self.cube_scale(j)

    def ball(self, cube_id: int) -> Ball:
        j = int(self.level_of[cube_id])
        return Ball(self.centers[cube_id], self.ball_radius(j))

    def level_cubes(self, j: int) -> np.ndarray:
        sl = self.level_slices[j]
        return np.arange(sl.start, sl.stop, dtype=np.intp)

    def members(self, cube_id: int) -> np.ndarray:
        """Point indices belonging to the cube (empty after file load)."""
        j = int(self.level_of[cube_id])
        if j not in self._members:
            return np.zeros(0, dtype=np.intp)
        order, offsets = self._members[j]
        local = cube_id - self.level_slices[j].start
        return order[offsets[local] : offsets[local + 1]]

    def assignment(self, j: int) -> np.ndarray:
        """Per-point cube id at level j (empty after file load)."""
        return self._assign.get(j, np.zeros(0, dtype=np.intp))

    def ancestors(self, cube_id: int) -> list[int]:
        out = []
        q = int(cube_id)
        while self.parent[q] >= 0:
            q = int(self.parent[q])
            out.append(q)
        return out

    def ancestor(self, cube_id: int, n: int) -> int | None:
        """n-th ancestor or None past the root."""
        q = int(cube_id)
        for _ in range(n):
            p = int(self.parent[q])
            if p < 0:
                return None
            q = p
        return q


def build_christ_cubes(
    h: NetHierarchy,
    s: float = 0.25,
    j_max: int | None = None,
    a0_min: float = 0.01,
) -> CubeTree:
    """Builds the cube tree; validates the inner-ball constant at build time.

    Raises ValueError("inner-ball violation ...") when the measured a0 falls
    below a0_min, which signals that s is too large for this set.
    """
    if s not in (0.5, 0.25, 0.125):
        raise ValueError("s must be one of 1/2, 1/4, 1/8")
    p = int(round(np.log2(1.0 / s)))
    E = h.pointset
    k0 = h.k_min
    avail = (h.k_max - k0) // p
    if j_max is None:
        j_max = avail
    if j_max > avail:
        raise ValueError("hierarchy lacks nets at the requested cube depth")

    tree = CubeTree(s, E.scale, k0)
    tree.pointset = E
    level_sets = [h.levels[k0 + j * p] for j in range(j_max + 1)]

    centers = []
    level_of = []
    parent = []
    center_idx = []
    offset = 0
    prev_slice = None
    for j, idx in enumerate(level_sets):
        sl = slice(offset, offset + len(idx))
        tree.level_slices[j] = sl
        centers.append(E.points[idx])
        level_of.append(np.full(len(idx), j, dtype=np.intp))
        center_idx.append(idx)
        if j == 0:
            parent.append(np.full(len(idx), -1, dtype=np.intp))
        else:
            pos = nearest_assign(E.points[idx], E.points[level_sets[j - 1]])
            parent.append(prev_slice.start + pos)
        prev_slice = sl
        offset += len(idx)

    tree.centers = np.vstack(centers)
    tree.level_of = np.concatenate(level_of)
    tree.parent = np.concatenate(parent)
    tree.center_idx = np.concatenate(center_idx)
    tree.children = [[] for _ in range(tree.n_cubes)]
    for q in range(tree.n_cubes):
        pq = tree.parent[q]
        if pq >= 0:
            tree.children[pq].append(q)

    # membership: points -> nearest finest center, then chain upward
    finest = j_max
    fin_slice = tree.level_slices[finest]
    fin_centers = tree.centers[fin_slice]
    if len(fin_centers) == len(E) and np.array_equal(
        tree.center_idx[fin_slice], np.arange(len(E))
    ):
        assign = np.arange(len(E), dtype=np.intp) + fin_slice.start
    else:
        assign = nearest_assign(E.points, fin_centers) + fin_slice.start
    tree._assign[finest] = assign
    for j in range(finest - 1, -1, -1):
        assign = tree.parent[assign]
        tree._assign[j] = assign

    c1 = 0.0
    for j in range(j_max + 1):
        a = tree._assign[j]
        order = np.argsort(a, kind="stable")
        counts = np.bincount(a - tree.level_slices[j].start, minlength=len(level_sets[j]))
        offsets = np.concatenate([[0], np.cumsum(counts)])
        tree._members[j] = (order, offsets)
        d = np.linalg.norm(E.points - tree.centers[a], axis=1)
        c1 = max(c1, float(d.max()) / tree.cube_scale(j))
    # pad to 1/(1-s): child centers sit within s^(j-1) of parents, so this
    # makes B(child) nest inside B(parent) and keeps curve cubes
    # upward-connected
    tree.C1 = max(c1, 1.0 / (1.0 - s))

    # measured inner constant: nearest point NOT in the cube, over all cubes
    a0 = np.inf
    for j in range(j_max + 1):
        sl = tree.level_slices[j]
        cen = tree.centers[sl]
        if len(cen) < 2:
            continue
        d, nn = cKDTree(cen).query(E.points, k=2)
        own = tree._assign[j] - sl.start
        foreign = np.where(nn[:, 0] != own, d[:, 0], d[:, 1])
        a0 = min(a0, float(foreign.min()) / tree.cube_scale(j))
    tree.a0 = 0.5 if np.isinf(a0) else a0
    if tree.a0 < a0_min:
        raise ValueError(
            f"inner-ball violation: measured a0={tree.a0:.4g} < a0_min={a0_min} "
            "(s too large for this set)"
        )
    _validate_inflated_nesting(tree)
    return tree


def _validate_inflated_nesting(tree: CubeTree, A: float = 2.0) -> None:
    """Proposition-style check: A*B(child) inside A*B(parent) for A >= 2."""
    for q in range(tree.n_cubes):
        pq = tree.parent[q]
        if pq < 0:
            continue
        j = int(tree.level_of[q])
        gap = np.linalg.norm(tree.centers[q] - tree.centers[pq])
        budget = A * tree.C1 * (tree.cube_scale(j - 1) - tree.cube_scale(j))
        if gap > budget + 1e-12:
            raise ValueError(
                f"inflated-ball nesting violated at cube {q} (gap {gap:.4g} > {budget:.4g})"
            )


def doubling_diagnostic(h: NetHierarchy, sample_cap: int = 2000, seed: int = 0) -> int:
    """Max count of same-level net points inside the double of a family ball.

    Exhaustive for levels with at most sample_cap points, seeded sampling
    above.  Used downstream as the empirical doubling constant.
    """
    rng = np.random.default_rng(seed)
    worst = 0
    for k, idx in h.levels.items():
        pts = h.pointset.points[idx]
        t = cKDTree(pts)
        r = 2.0 * (2.0 * h.separation(k))
        if len(pts) > sample_cap:
            probe = pts[rng.choice(len(pts), sample_cap, replace=False)]
        else:
            probe = pts
        counts = t.query_ball_point(probe, r, return_length=True)
        worst = max(worst, int(np.max(counts)))
    return worst


# ---------------------------------------------------------------------------
# file formats


def save_cubetree(tree: CubeTree, path) -> None:
    records = []
    for q in range(tree.n_cubes):
        records.append(
            {
                "id": int(q),
                "level": int(tree.level_of[q]),
                "center": [float(x) for x in tree.centers[q]],
                "parent": int(tree.parent[q]),
                "children": [int(c) for c in tree.children[q]],
            }
        )
    doc = {
        "s": tree.s,
        "scale": tree.scale,
        "k0": tree.k0,
        "a0": tree.a0,
        "C1": tree.C1,
        "cubes": records,
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_cubetree(path) -> CubeTree:
    with open(path) as f:
        doc = json.load(f)
    tree = CubeTree(doc["s"], doc["scale"], doc["k0"])
    cubes = doc["cubes"]
    n = len(cubes)
    tree.level_of = np.array([c["level"] for c in cubes], dtype=np.intp)
    tree.centers = np.array([c["center"] for c in cubes], dtype=float)
    tree.parent = np.array([c["parent"] for c in cubes], dtype=np.intp)
    tree.children = [list(c["children"]) for c in cubes]
    tree.center_idx = np.full(n, -1, dtype=np.intp)
    tree.a0 = doc["a0"]
    tree.C1 = doc["C1"]
    levels = tree.level_of
    for j in range(int(levels.max()) + 1 if n else 0):
        where = np.nonzero(levels == j)[0]
        tree.level_slices[j] = slice(int(where.min()), int(where.max()) + 1)
    return tree
