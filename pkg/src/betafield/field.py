"""Coarse plane-field construction and the line-field cone aggregation.

Per cube, the construction maximizes how many consecutive ancestors a flat
can stay "good" for (meeting the 3x inflated ball while hugging E inside
the 5x ball), over a nested chain of directions built one dimension at a
time from well-separated sample-point chords.  Stored entries have
dimension at most d-1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import AffineFlat, Ball, Subspace, dist_to_flat, flat_ball_sample, two_sided_angle
from .nets import CubeTree, PointSet

DEDUP_FACTOR = 8.0  # candidate directions closer than this times eps2 merge
MAX_CANDIDATES = 48
MAX_NET_POINTS = 96
MAX_ANCHORS = 24
MAX_GOOD_SAMPLES = 200_000


@dataclass(frozen=True)
class FieldParams:
    """Parameters of the construction; eps2 has one entry per stage k=1..d.

    The shipped chain is eps2[k] = eps0 * (1e-2 / Lam^2)^(d-k), which keeps
    each stage two orders of magnitude below the next over Lam^2.
    """

    eps: float
    A: float
    d: int
    eps0: float
    eps1: float
    Lam: float
    eps2: tuple

    @staticmethod
    def create(
        eps: float,
        A: float,
        d: int,
        eps0: float = 0.1,
        eps2: tuple | None = None,
        strict: bool = True,
    ) -> "FieldParams":
        if eps <= 0 or A < 1 or d < 1 or not 0 < eps0 < 1:
            raise ValueError("need eps > 0, A >= 1, d >= 1, 0 < eps0 < 1")
        eps1 = eps / (2.0 * A)
        lam = 100.0 * A / eps1
        if eps2 is None:
            eps2 = tuple(eps0 * (1e-2 / lam**2) ** (d - k) for k in range(1, d + 1))
        p = FieldParams(eps, A, d, eps0, eps1, lam, tuple(float(x) for x in eps2))
        if strict:
            p.validate()
        return p

    def validate(self):
        if len(self.eps2) != self.d:
            raise ValueError("eps2 must have d entries")
        if abs(self.eps1 - self.eps / (2 * self.A)) > 1e-12 * self.eps1:
            raise ValueError("eps1 != eps / (2A)")
        if abs(self.Lam - 100 * self.A / self.eps1) > 1e-9 * self.Lam:
            raise ValueError("Lam != 100 A / eps1")
        for k in range(self.d - 1):
            if not self.eps2[k] <= 0.1 * self.eps2[k + 1] / self.Lam**2:
                raise ValueError(f"eps2 chain violated between stages {k + 1} and {k + 2}")
        if not self.eps2[-1] <= self.eps0:
            raise ValueError("eps2 must end at or below eps0")

    def to_dict(self) -> dict:
        return {
            "eps": self.eps, "A": self.A, "d": self.d, "eps0": self.eps0,
            "eps1": self.eps1, "Lam": self.Lam, "eps2": list(self.eps2),
        }


class CoarseField:
    """cube id -> subspace of dimension <= d-1, with ball-to-cube lookup."""

    def __init__(self, tree: CubeTree, params: FieldParams):
        self.tree = tree
        self.params = params
        n = tree.n_cubes
        dmax = max(params.d - 1, 1)
        self.dims = np.full(n, -1, dtype=np.intp)
        self.basis = np.zeros((n, dmax, tree.centers.shape[1]))
        self.n_chain = np.zeros((n, max(params.d - 1, 1)), dtype=np.intp)
        self._level_trees: dict[int, cKDTree] = {}

    def set_entry(self, q: int, sub: Subspace, n_values=None):
        self.dims[q] = sub.dim
        self.basis[q, : sub.dim] = sub.basis
        if n_values is not None:
            self.n_chain[q, : len(n_values)] = n_values

    def entry(self, q: int) -> Subspace | None:
        d = int(self.dims[q])
        if d < 0:
            return None
        return Subspace(self.basis[q, :d].copy())

    def complete(self) -> bool:
        return bool(np.all(self.dims >= 0))

    def _tree_at(self, j: int) -> cKDTree:
        return self.tree.level_tree(j)

    def cube_for_ball(self, center, radius: float) -> int:
        """Comparable-scale cube whose inflated ball contains the inflated
        input ball; walks coarser until containment holds."""
        tree = self.tree
        A = self.params.A
        j = tree.n_levels - 1
        while j > 0 and tree.ball_radius(j) < radius:
            j -= 1
        center = np.asarray(center, dtype=float)
        while True:
            _, pos = self._tree_at(j).query(center)
            q = int(tree.level_slices[j].start + pos)
            gap = float(np.linalg.norm(tree.centers[q] - center))
            if gap + A * radius <= A * tree.ball_radius(j) or j == 0:
                return q
            j -= 1

    def for_ball(self, center, radius: float) -> Subspace | None:
        return self.entry(self.cube_for_ball(center, radius))

    def entries_for_balls(self, centers, radius: float) -> list:
        """Vectorized for_ball over same-radius balls."""
        tree = self.tree
        A = self.params.A
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        j = tree.n_levels - 1
        while j > 0 and tree.ball_radius(j) < radius:
            j -= 1
        gaps, pos = self._tree_at(j).query(centers)
        qs = tree.level_slices[j].start + np.asarray(pos, dtype=np.intp)
        if j > 0:
            bad = gaps + A * radius > A * tree.ball_radius(j)
            for i in np.nonzero(bad)[0]:
                qs[i] = self.cube_for_ball(centers[i], radius)
        return [self.entry(int(q)) for q in qs]

    def save(self, path):
        doc = {"params": self.params.to_dict(), "entries": {}}
        for q in range(self.tree.n_cubes):
            d = int(self.dims[q])
            if d >= 0:
                doc["entries"][str(q)] = {
                    "dim": d,
                    "basis": [[float(x) for x in row] for row in self.basis[q, :d]],
                }
        with open(path, "w") as f:
            json.dump(doc, f)

    @staticmethod
    def load(path, tree: CubeTree) -> "CoarseField":
        with open(path) as f:
            doc = json.load(f)
        pd = doc["params"]
        params = FieldParams.create(
            pd["eps"], pd["A"], pd["d"], pd["eps0"], eps2=tuple(pd["eps2"]), strict=False
        )
        fld = CoarseField(tree, params)
        n = tree.centers.shape[1]
        for key, ent in doc["entries"].items():
            q = int(key)
            d = int(ent["dim"])
            fld.dims[q] = d
            if d > 0:
                fld.basis[q, :d] = np.array(ent["basis"], dtype=float).reshape(d, n)
        return fld


class ConstantField:
    """Fixed direction everywhere; the adversarial/control fields."""

    def __init__(self, direction, ambient_dim: int = 2):
        self.sub = Subspace.from_vectors([direction])

    def for_ball(self, center, radius: float) -> Subspace:
        return self.sub


class SeededRandomField:
    """Deterministic pseudo-random line field keyed on ball geometry."""

    def __init__(self, seed: int, ambient_dim: int = 2):
        self.seed = seed
        self.dim = ambient_dim

    def for_ball(self, center, radius: float) -> Subspace:
        h = hash((self.seed, float(radius), tuple(np.round(np.asarray(center, float), 12))))
        rng = np.random.default_rng(abs(h) % (2**63))
        v = rng.standard_normal(self.dim)
        return Subspace.from_vectors([v])


# ---------------------------------------------------------------------------
# the good-subspace test and ancestry counts


def _btilde(tree: CubeTree, params: FieldParams, q: int) -> Ball:
    j = int(tree.level_of[q])
    return Ball(tree.centers[q], params.A * tree.ball_radius(j))


def good_test_impossible(tree: CubeTree, params: FieldParams, E: PointSet, level: int, k: int) -> bool:
    """True when no k-flat can pass the good test at this cube level:
    the tolerance tube around the flat is too thin to chain between sample
    points of E (tube width under the minimal point gap), while the flat's
    patch through the 5x ball is far longer than one tube cover."""
    diam = 2.0 * params.A * tree.ball_radius(level)
    tol = 1.25 * params.eps2[k - 1] * diam
    chord_min = 8.0 * params.A * tree.ball_radius(level)
    return 2.5 * tol < E.min_gap and chord_min > 4.0 * tol


def is_good(V: AffineFlat, q: int, tree: CubeTree, params: FieldParams, E: PointSet) -> bool:
    """Good test: V meets 3x the inflated cube ball and its patch inside 5x
    stays within the stage tolerance of E."""
    k = V.dim
    if not 1 <= k <= params.d:
        raise ValueError("flat dimension must be in 1..d")
    bt = _btilde(tree, params, q)
    if dist_to_flat(bt.center, V) > 3.0 * bt.radius:
        return False
    j = int(tree.level_of[q])
    if good_test_impossible(tree, params, E, j, k):
        return False
    spacing = params.eps2[k - 1] * bt.diam / 4.0
    span = 10.0 * bt.radius
    if (span / spacing) ** k > MAX_GOOD_SAMPLES:
        raise ValueError(
            "good-test sample budget exceeded; eps2 too small for this scale"
        )
    sample = flat_ball_sample(V, bt.scaled(5.0), spacing)
    if len(sample) == 0:
        return False
    tol = params.eps2[k - 1] * bt.diam + spacing
    d = E.nearest_dists(sample)
    return bool(d.max() <= tol)


def n_of_flat(V: AffineFlat, q: int, tree: CubeTree, params: FieldParams, E: PointSet) -> int:
    """First ancestor generation where V stops being good (capped past root)."""
    n = 0
    cur: int | None = int(q)
    while cur is not None:
        if not is_good(V, cur, tree, params, E):
            return n
        n += 1
        cur = tree.ancestor(q, n)
    return n


def _anchor_candidates(tau: Subspace, q: int, tree: CubeTree, params: FieldParams, E: PointSet):
    bt = _btilde(tree, params, q)
    idx = E.ball_indices(bt.center, 3.0 * bt.radius)
    pts = E.points[idx]
    if len(pts) > MAX_ANCHORS:
        order = np.argsort(np.linalg.norm(pts - bt.center, axis=1), kind="stable")
        pts = pts[order[:MAX_ANCHORS]]
    anchors = list(pts)
    k = tau.dim
    res = params.eps2[k - 1] * bt.diam / 2.0
    # the offset grid only matters when it is coarse enough to differ from
    # anchoring at sample points themselves
    if res >= E.min_gap / 4.0 and k < E.dim:
        normal = _orthogonal_complement(tau)
        grid = flat_ball_sample(AffineFlat(bt.center, normal), bt.scaled(3.0), res)
        if len(grid) > MAX_ANCHORS:
            grid = grid[:: len(grid) // MAX_ANCHORS]
        anchors.extend(grid)
    return anchors


def _orthogonal_complement(sub: Subspace) -> Subspace:
    n = sub.ambient_dim
    full = np.eye(n)
    from .geometry import _orthonormalize

    rows = []
    for v in full:
        r = v - sub.project(v)
        rows.append(r)
    return Subspace(_orthonormalize(np.array(rows)))


def n_of_direction(tau: Subspace, q: int, tree: CubeTree, params: FieldParams, E: PointSet) -> int:
    """Max of n_of_flat over anchor candidates for flats parallel to tau."""
    if tau.dim < 1:
        raise ValueError("tau must have dimension >= 1")
    if good_test_impossible(tree, params, E, int(tree.level_of[q]), tau.dim):
        return 0
    best = 0
    for anchor in _anchor_candidates(tau, q, tree, params, E):
        best = max(best, n_of_flat(AffineFlat(anchor, tau), q, tree, params, E))
    return best


# ---------------------------------------------------------------------------
# candidate directions and the field build


LINE_SCORE_TOP = 8
LINE_SCORE_SAMPLES = 17


def _line_hug_scores(E: PointSet, bt: Ball, dirs: np.ndarray, mids: np.ndarray) -> np.ndarray:
    """Per direction, the sup distance to E along the chord's line across
    the cube's own inflated ball: the good test's measurement at the cube's
    scale.  One batched nearest-neighbor query for all sampled lines."""
    t = np.linspace(-bt.radius, bt.radius, LINE_SCORE_SAMPLES)
    samples = (mids[:, None, :] + t[None, :, None] * dirs[:, None, :]).reshape(-1, dirs.shape[1])
    d, _ = E.tree.query(samples)
    return np.asarray(d).reshape(len(dirs), LINE_SCORE_SAMPLES).max(axis=1)


def stage_directions(
    q: int, k: int, base: Subspace, tree: CubeTree, params: FieldParams, E: PointSet,
    pool=None,
) -> np.ndarray:
    """Raw candidate extension directions for stage k at a cube, best first.

    The chord family is the Claim-style recipe: pairs of net points near
    the cube separated by about the inflated ball diameter.  Candidates are
    ranked by the orthogonal spread of the local sample; at scales well
    above the data resolution the leading few are re-ranked by how tightly
    their chord line hugs E across the 5x ball (the good test's own
    measurement), so ancestry-count ties resolve toward directions along
    which E has linear structure.  Ties keep enumeration (locality) order.
    """
    bt = _btilde(tree, params, q)
    pts = _net_near_c(E, bt.center, bt.radius, params.eps2[k - 1], pool)
    sep = (1.0 - 4.0 * params.eps2[k - 1]) * bt.diam
    dirs, mids = _pair_directions(pts, bt.center, sep, base)
    if len(dirs) <= 1:
        return dirs
    if bt.radius >= 2.0 * E.min_gap:
        scores = _line_hug_scores(E, bt, dirs, mids)
    else:
        scores = _fit_scores(pts, dirs)
    return dirs[np.argsort(scores, kind="stable")]


def candidate_directions(
    q: int,
    k: int,
    base: Subspace,
    tree: CubeTree,
    params: FieldParams,
    E: PointSet,
) -> list[Subspace]:
    """k-planes extending `base`, spanned with chords of well-separated
    sample points near the cube, deduplicated at the stage angle tolerance
    and capped deterministically.  Ordered by local fit quality."""
    if base.dim != k - 1:
        raise ValueError("base must have dimension k-1")
    dirs = stage_directions(q, k, base, tree, params, E)
    dedup_tol = DEDUP_FACTOR * params.eps2[k - 1]
    out: list[Subspace] = []
    for e in dirs:
        cand = Subspace(np.vstack([base.basis, e[None, :]]))
        if any(two_sided_angle(cand, prev) < dedup_tol for prev in out):
            continue
        out.append(cand)
        if len(out) >= MAX_CANDIDATES:
            break
    return out


def _stage_pool(
    E: PointSet, center: np.ndarray, radius_tilde: float, eps2k: float, mult: float,
    pool_ids=None,
) -> np.ndarray:
    """Deterministic thinned pool of sample points around a cube.

    Points within mult * radius_tilde, ordered by (distance, index), thinned
    to a net whose spacing is the stage spacing but never finer than a tenth
    of the pool diameter (so the capped pool always spans the ball and
    chord-separated pairs survive the cap)."""
    from . import kernels

    if pool_ids is None:
        pool_ids = E.tree.query_ball_point(center, mult * radius_tilde)
    ids = np.asarray(pool_ids, dtype=np.intp)
    if len(ids) == 0:
        return np.zeros((0, E.dim))
    pts = E.points[ids]
    d = np.linalg.norm(pts - center, axis=1)
    pts = pts[np.lexsort((ids, d))]
    spacing = max(eps2k * 2.0 * radius_tilde, 2.0 * mult * radius_tilde / 10.0)
    if spacing > E.min_gap and len(pts) > 16:
        keep = kernels.greedy_net(pts, np.zeros(0, dtype=np.intp), spacing)
        pts = pts[keep]
    return pts[:MAX_NET_POINTS]


def _net_near_c(E: PointSet, center: np.ndarray, radius_tilde: float, eps2k: float,
                first_pool=None) -> np.ndarray:
    """Thinned pool for candidate enumeration; the radius expands until a
    pair at chord separation exists (or the 20x ball is reached)."""
    from . import kernels

    sep = (1.0 - 4.0 * eps2k) * 2.0 * radius_tilde
    pts = np.zeros((0, E.dim))
    for mult in (2.5, 5.0, 10.0, 20.0):
        pool = first_pool if mult == 2.5 else None
        pts = _stage_pool(E, center, radius_tilde, eps2k, mult, pool)
        if len(pts) >= 2 and kernels.best_near_pair(pts, center, sep)[0] >= 0:
            break
    return pts


def _net_near(q: int, tree: CubeTree, params: FieldParams, E: PointSet, k: int) -> np.ndarray:
    bt = _btilde(tree, params, q)
    return _net_near_c(E, bt.center, bt.radius, params.eps2[k - 1])


def _pair_directions(pts: np.ndarray, center: np.ndarray, sep: float, base: Subspace,
                     cap: int = MAX_CANDIDATES) -> tuple[np.ndarray, np.ndarray]:
    """(unit directions, chord midpoints) of pairs at separation >= sep,
    directions projected off the base, ordered by locality (outer then inner
    distance from the center), capped.  This is the raw candidate
    enumeration both build paths share."""
    n = pts.shape[1] if pts.ndim == 2 else 0
    empty = (np.zeros((0, n)), np.zeros((0, n)))
    m = len(pts)
    if m < 2:
        return empty
    dc = np.linalg.norm(pts - center, axis=1)
    ii, jj = np.triu_indices(m, k=1)
    diff = pts[jj] - pts[ii]
    nd = np.sqrt((diff * diff).sum(axis=1))
    ok = nd >= sep
    ii, jj, diff, nd = ii[ok], jj[ok], diff[ok], nd[ok]
    if len(ii) == 0:
        return empty
    hi = np.maximum(dc[ii], dc[jj])
    lo = np.minimum(dc[ii], dc[jj])
    order = np.lexsort((jj, ii, lo, hi))[: 2 * cap]
    diff, nd = diff[order], nd[order]
    mids = (pts[jj[order]] + pts[ii[order]]) / 2.0
    if base.dim > 0:
        e = diff - (diff @ base.basis.T) @ base.basis
    else:
        e = diff
    ne = np.sqrt((e * e).sum(axis=1))
    keep = ne >= 1e-12 * nd
    e, ne, mids = e[keep][:cap], ne[keep][:cap], mids[keep][:cap]
    return e / ne[:, None], mids


def _fit_scores(pool: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Half-spread of the pool orthogonal to each direction: how well a line
    in that direction can fit the local sample.  Lower is flatter."""
    if len(dirs) == 0:
        return np.zeros(0)
    centered = pool - pool.mean(axis=0)
    if pool.shape[1] == 2:
        normals = np.stack([-dirs[:, 1], dirs[:, 0]], axis=1)
        h = centered @ normals.T
        return (h.max(axis=0) - h.min(axis=0)) / 2.0
    scores = np.empty(len(dirs))
    for i, u in enumerate(dirs):
        r = centered - np.outer(centered @ u, u)
        scores[i] = np.sqrt((r * r).sum(axis=1).max())
    return scores


def _coordinate_fallback(base: Subspace) -> Subspace:
    """Extends the base by the first coordinate direction not already in it."""
    n = base.ambient_dim
    for a in range(n):
        e = np.zeros(n)
        e[a] = 1.0
        r = e - base.project(e)
        if np.linalg.norm(r) > 1e-9:
            return Subspace(np.vstack([base.basis, r[None, :] / np.linalg.norm(r)]))
    raise ValueError("base already spans the ambient space")


def build_epsilon_field(tree: CubeTree, E: PointSet, params: FieldParams) -> CoarseField:
    """Per cube, the nested chain tau_1 in ... in tau_(d-1), each stage
    maximizing the good-ancestry count over its candidate directions (ties
    break to the first, most local candidate).

    Levels where the good test is provably impossible at every stage skip
    the ancestry evaluation: all counts are 0, so the first candidate wins
    outright and only the minimal chord search runs.
    """
    if params.d < 2:
        raise ValueError("field construction needs d >= 2")
    fld = CoarseField(tree, params)
    zero_n = [0] * (params.d - 1)
    for j in range(tree.n_levels):
        fast = all(good_test_impossible(tree, params, E, j, k) for k in range(1, params.d))
        sl = tree.level_slices[j]
        centers = tree.centers[sl]
        rt = params.A * tree.ball_radius(j)
        sep0 = (1.0 - 4.0 * params.eps2[0]) * 2.0 * rt
        if fast:
            pools = E.tree.query_ball_point(centers, 2.5 * rt, return_sorted=True)
            for local in range(len(centers)):
                q = sl.start + local
                base = Subspace.zero(E.dim)
                for k in range(1, params.d):
                    dirs = stage_directions(q, k, base, tree, params, E, pool=pools[local])
                    if len(dirs) == 0:
                        base = _coordinate_fallback(base)
                    else:
                        # good test impossible at this scale: every candidate
                        # ties at ancestry 0 and the best-fitting one wins
                        base = Subspace(np.vstack([base.basis, dirs[0][None, :]]))
                fld.set_entry(q, base, zero_n)
            continue
        for q in tree.level_cubes(j):
            q = int(q)
            base = Subspace.zero(E.dim)
            n_values = []
            for k in range(1, params.d):
                cands = candidate_directions(q, k, base, tree, params, E)
                if not cands:
                    base = _coordinate_fallback(base)
                    n_values.append(0)
                    continue
                best_n, best = -1, cands[0]
                for cand in cands:
                    nv = n_of_direction(cand, q, tree, params, E)
                    if nv > best_n:
                        best_n, best = nv, cand
                base = best
                n_values.append(best_n)
            fld.set_entry(q, base, n_values)
    return fld


# ---------------------------------------------------------------------------
# cone aggregation of line fields


def aggregate_field(fields: list[CoarseField]) -> tuple[CoarseField, np.ndarray]:
    """Combines line fields built at eps = 2^-1..2^-m into one field.

    Per cube, finds the maximal K with the cone intersection
    Cone(tau_k, 2^-k), k <= K, nonempty and returns a direction inside it;
    exact arc intersection in the plane, pairwise feasibility plus greedy
    projection (verified, K shrunk on failure) in higher dimension.
    Returns (field, per-cube K).
    """
    if not fields:
        raise ValueError("no fields to aggregate")
    tree = fields[0].tree
    for f in fields:
        if f.tree is not tree:
            raise ValueError("fields must share one cube tree")
        if np.any(f.dims > 1):
            raise ValueError("aggregation implemented for line fields only")
    out = CoarseField(tree, fields[0].params)
    K_arr = np.zeros(tree.n_cubes, dtype=np.intp)
    n = tree.centers.shape[1]
    for q in range(tree.n_cubes):
        dirs = []
        for f in fields:
            e = f.entry(q)
            if e is None or e.dim == 0:
                break
            dirs.append(e.basis[0])
        if not dirs:
            continue
        if n == 2:
            K, u = _aggregate_2d(dirs)
        else:
            K, u = _aggregate_nd(dirs)
        K_arr[q] = K
        out.set_entry(q, Subspace.from_vectors([u]))
    return out, K_arr


def _aggregate_2d(dirs: list[np.ndarray]) -> tuple[int, np.ndarray]:
    """Exact projective arc intersection in the plane."""
    base = np.arctan2(dirs[0][1], dirs[0][0]) % np.pi
    lo, hi = base - 0.5, base + 0.5
    K = 1
    for k in range(2, len(dirs) + 1):
        a = np.arctan2(dirs[k - 1][1], dirs[k - 1][0]) % np.pi
        # representative of a nearest to the current window center (mod pi)
        mid = (lo + hi) / 2.0
        a += np.pi * round((mid - a) / np.pi)
        r = 2.0**-k
        nlo, nhi = max(lo, a - r), min(hi, a + r)
        if nlo > nhi:
            break
        lo, hi = nlo, nhi
        K = k
    phi = (lo + hi) / 2.0
    return K, np.array([np.cos(phi), np.sin(phi)])


def _aggregate_nd(dirs: list[np.ndarray]) -> tuple[int, np.ndarray]:
    """Pairwise-angle feasibility, greedy representative, verify and shrink."""
    from .geometry import line_angle

    m = len(dirs)
    K = 1
    for k in range(2, m + 1):
        ok = all(
            line_angle(dirs[i - 1], dirs[j - 1]) <= 2.0**-i + 2.0**-j
            for i in range(1, k + 1)
            for j in range(i + 1, k + 1)
        )
        if not ok:
            break
        K = k
    while K >= 1:
        u = _greedy_cone_point(dirs[:K])
        if all(line_angle(u, dirs[k - 1]) <= 2.0**-k + 1e-12 for k in range(1, K + 1)):
            return K, u
        K -= 1
    return 1, np.asarray(dirs[0], dtype=float)


def _greedy_cone_point(dirs: list[np.ndarray]) -> np.ndarray:
    from .geometry import line_angle

    u = np.asarray(dirs[0], dtype=float)
    u = u / np.linalg.norm(u)
    for k in range(2, len(dirs) + 1):
        v = np.asarray(dirs[k - 1], dtype=float)
        v = v / np.linalg.norm(v)
        if np.dot(u, v) < 0:
            v = -v
        ang = line_angle(u, v)
        r = 2.0**-k
        if ang > r:
            # rotate u toward v in their common plane to the cone boundary
            w = v - np.dot(v, u) * u
            nw = np.linalg.norm(w)
            if nw < 1e-15:
                continue
            w = w / nw
            t = ang - r
            u = u * np.cos(t) + w * np.sin(t)
    return u / np.linalg.norm(u)
