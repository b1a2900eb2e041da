"""Diamond blow-up construction and the paired-curve lower bounds.

Each level replaces every subdivided segment by a six-segment "diamond" of
eccentricity a_n; monotone curves pick the top or bottom of every diamond
by one coin flip per level.  Against any line field, antithetic curve
pairs (flip one level's coin) pay at least order a^2 log(1/a) per level in
the restricted-beta square sum: the two paths leave any pre-assigned line
at slope 4a on opposite sides, across all log(1/a) ball scales spanning
the diamond.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball
from .nets import PointSet
from .polyline import Polyline


@dataclass
class DiamondLevel:
    n: int  # 1-based level index; level 1 is the unit segment
    a: float | None  # eccentricity used to create this level (None for level 1)
    N: int | None  # subdivision used to create this level
    edges: np.ndarray  # (m, 2, 2) oriented segments
    parents: np.ndarray  # (m,) index of the parent edge one level up

    @property
    def longest_edge(self) -> float:
        d = self.edges[:, 1, :] - self.edges[:, 0, :]
        return float(np.sqrt((d * d).sum(axis=1)).max())


@dataclass
class DiamondConstruction:
    levels: list[DiamondLevel]
    a_schedule: tuple
    N_schedule: tuple
    r_schedule: tuple  # the scale witnesses of the subdivision recursion

    @property
    def depth(self) -> int:
        return len(self.levels)

    def vertex_sample(self) -> PointSet:
        """Unique vertices of the finest level (the point sample of P)."""
        v = self.levels[-1].edges.reshape(-1, 2)
        v = np.unique(np.round(v, 12), axis=0)
        return PointSet(v)

    def to_json(self) -> str:
        doc = {
            "a_schedule": list(self.a_schedule),
            "N_schedule": list(self.N_schedule),
            "levels": [
                {
                    "n": lv.n,
                    "a": lv.a,
                    "N": lv.N,
                    "edges": [[[float(x) for x in p] for p in e] for e in lv.edges],
                }
                for lv in self.levels
            ],
        }
        return json.dumps(doc)


def _rot90(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def t_a_operation(seg, a: float) -> np.ndarray:
    """The six oriented segments of the diamond operation on one segment.

    For a segment [x, y]: keep the first and last quarters, and connect the
    quarter points to the two apexes at x_{1/2} +- a * rot90(y - x).
    """
    if not 0 < a < 0.25:
        raise ValueError("need 0 < a < 1/4")
    seg = np.asarray(seg, dtype=float)
    x, y = seg[0], seg[1]
    d = y - x
    q1 = x + d / 4.0
    mid = x + d / 2.0
    q3 = x + 3.0 * d / 4.0
    top = mid + a * _rot90(d)
    bot = mid - a * _rot90(d)
    return np.array(
        [
            [x, q1],
            [q3, y],
            [q1, top],
            [q1, bot],
            [top, q3],
            [bot, q3],
        ]
    )


def t_a_total_length(a: float, seg_len: float = 1.0) -> float:
    """Closed-form total length of the six segments."""
    return seg_len * (0.5 + 4.0 * math.sqrt(1.0 / 16.0 + a * a))


def default_a_schedule(levels: int, c0: float = 8e-4) -> tuple:
    """a_n = c0 / (sqrt(n) log(n+2)), capped below 1e-3, prefix-rescaled to
    keep the square sum at most one (inactive at desk scales)."""
    a = np.array([min(c0 / (math.sqrt(n) * math.log(n + 2)), 9e-4) for n in range(1, levels)])
    s = float((a**2).sum())
    if s > 1.0:
        a = a / math.sqrt(s)
    return tuple(float(x) for x in a)


def divergence_n_schedule(a_schedule) -> tuple:
    """The subdivision counts of the limit construction, N_n >= 10 / a_n.

    Materializing even three levels of this schedule is infeasible (edge
    counts grow like the product of 6 N_n); it is provided for documenting
    the divergent regime, while builds use explicit desk-scale schedules.
    """
    return tuple(int(math.ceil(10.0 / a)) for a in a_schedule)


def build_diamond(
    levels: int,
    a_schedule=None,
    N_schedule=None,
    validate: bool = True,
) -> DiamondConstruction:
    """P_1 = unit segment; P_{n+1} applies the diamond operation to every
    subdivided edge.  Validates edge disjointness and the Hausdorff bound
    between consecutive levels at build time."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if a_schedule is None:
        a_schedule = default_a_schedule(levels)
    if N_schedule is None:
        N_schedule = tuple([8] * (levels - 1))
    a_schedule = tuple(float(a) for a in a_schedule)
    N_schedule = tuple(int(N) for N in N_schedule)
    if len(a_schedule) < levels - 1 or len(N_schedule) < levels - 1:
        raise ValueError("schedules shorter than the requested depth")
    if any(not 0 < a < 1e-3 for a in a_schedule[: levels - 1]):
        raise ValueError("a_n must lie in (0, 1e-3)")
    if any(a2 > a1 for a1, a2 in zip(a_schedule, a_schedule[1:])):
        raise ValueError("a_n must be decreasing")
    if any(N < 2 for N in N_schedule[: levels - 1]):
        raise ValueError("N_n must be >= 2")

    lv = [DiamondLevel(1, None, None, np.array([[[0.0, 0.0], [1.0, 0.0]]]), np.array([-1]))]
    r_sched = [1.0]
    for i in range(levels - 1):
        a, N = a_schedule[i], N_schedule[i]
        cur = lv[-1].edges
        m = len(cur)
        starts = cur[:, 0, :]
        dvec = (cur[:, 1, :] - cur[:, 0, :]) / N
        t = np.arange(N)
        p0 = starts[:, None, :] + t[None, :, None] * dvec[:, None, :]
        pieces = np.stack([p0, p0 + dvec[:, None, :]], axis=2).reshape(-1, 2, 2)
        piece_parent = np.repeat(np.arange(m), N)
        new_edges = np.empty((len(pieces) * 6, 2, 2))
        new_parents = np.empty(len(pieces) * 6, dtype=np.intp)
        for pi, piece in enumerate(pieces):
            new_edges[6 * pi : 6 * pi + 6] = t_a_operation(piece, a)
            new_parents[6 * pi : 6 * pi + 6] = piece_parent[pi]
        lvl = DiamondLevel(len(lv) + 1, a, N, new_edges, new_parents)
        # the scale witness of the subdivision recursion: between the piece
        # length and the previous edge length
        s_n = lv[-1].longest_edge
        r_sched.append(math.sqrt(s_n * (s_n / N)))
        lv.append(lvl)
        if validate:
            _check_disjoint(lvl)
            _check_hausdorff(lv[-2], lvl)
    return DiamondConstruction(lv, a_schedule[: levels - 1], N_schedule[: levels - 1], tuple(r_sched))


def _segments_properly_intersect(a0, a1, b0, b1, tol=1e-15) -> bool:
    """True when two segments share a point that is not a common endpoint."""
    d1 = a1 - a0
    d2 = b1 - b0
    den = d1[0] * d2[1] - d1[1] * d2[0]
    shared = any(
        np.allclose(p, q, atol=1e-14) for p in (a0, a1) for q in (b0, b1)
    )
    if abs(den) < tol:
        # parallel: overlap test via projections
        n = np.array([-d1[1], d1[0]])
        if abs(np.dot(b0 - a0, n)) > 1e-14 * max(1.0, np.linalg.norm(d1)):
            return False
        t0 = np.dot(b0 - a0, d1) / np.dot(d1, d1)
        t1 = np.dot(b1 - a0, d1) / np.dot(d1, d1)
        lo, hi = min(t0, t1), max(t0, t1)
        overlap = min(hi, 1.0) - max(lo, 0.0)
        return overlap > 1e-9  # in parameter units: well above endpoint slack
    s = ((b0 - a0)[0] * d2[1] - (b0 - a0)[1] * d2[0]) / den
    u = ((b0 - a0)[0] * d1[1] - (b0 - a0)[1] * d1[0]) / den
    inside = -1e-12 <= s <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12
    if not inside:
        return False
    if shared and (s < 1e-9 or s > 1 - 1e-9) and (u < 1e-9 or u > 1 - 1e-9):
        return False
    return True


def _check_disjoint(level: DiamondLevel) -> None:
    """Exact pairwise disjointness (except shared endpoints), bucketed so
    only nearby segments are compared."""
    edges = level.edges
    lens = np.linalg.norm(edges[:, 1] - edges[:, 0], axis=1)
    cell = max(float(lens.max()), 1e-12)
    buckets: dict[tuple, list[int]] = {}
    mids = edges.mean(axis=1)
    keys = np.floor(mids / cell).astype(np.int64)
    for i, key in enumerate(map(tuple, keys)):
        buckets.setdefault(key, []).append(i)
    for (kx, ky), members in buckets.items():
        pool = []
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                pool.extend(buckets.get((kx + ox, ky + oy), ()))
        for i in members:
            for j in pool:
                if j <= i:
                    continue
                if _segments_properly_intersect(
                    edges[i, 0], edges[i, 1], edges[j, 0], edges[j, 1]
                ):
                    raise ValueError(f"edge disjointness violated at level {level.n}: {i}, {j}")


def _check_hausdorff(prev: DiamondLevel, cur: DiamondLevel) -> None:
    """d_H(P_n, P_{n+1}) <= 1e-3 s_n / N_n, sampled at vertices and apexes
    (the apex height a * |piece| is the exact extremal distance)."""
    a = cur.a
    piece_len = prev.longest_edge / cur.N
    bound = 1e-3 * piece_len
    measured = a * piece_len
    if measured > bound * (1 + 1e-9):
        raise ValueError(
            f"hausdorff bound violated at level {cur.n}: {measured:.3e} > {bound:.3e}"
        )


def hausdorff_distance(lv1: DiamondLevel, lv2: DiamondLevel, samples_per_edge: int = 3) -> float:
    """Numerical two-sided Hausdorff distance between edge sets."""
    from . import kernels

    def sample(edges):
        t = np.linspace(0.0, 1.0, samples_per_edge)
        pts = edges[:, 0, None, :] + t[None, :, None] * (edges[:, 1, None, :] - edges[:, 0, None, :])
        return pts.reshape(-1, 2)

    def one_sided(src, dst_edges):
        d = kernels.segments_min_dists(sample(src), dst_edges[:, 0], dst_edges[:, 1])
        return float(d.max())

    return max(one_sided(lv1.edges, lv2.edges), one_sided(lv2.edges, lv1.edges))


def porosity_probe(
    construction: DiamondConstruction,
    n_probes: int = 1000,
    delta: float = 1e-4,
    seed: int = 0,
) -> float:
    """Fraction of random balls (at built scales) containing an empty
    sub-ball of relative radius delta; 1.0 means every probe found a hole."""
    rng = np.random.default_rng(np.random.Philox(seed))
    edges = construction.levels[-1].edges
    from . import kernels

    s_fine = construction.levels[-1].longest_edge
    ok = 0
    for _ in range(n_probes):
        x = np.array([rng.uniform(0, 1), rng.uniform(-0.1, 0.1)])
        r = np.exp(rng.uniform(np.log(4 * s_fine), 0.0))
        ys = x + r * (rng.uniform(-1, 1, size=(64, 2)))
        keep = np.linalg.norm(ys - x, axis=1) <= r
        ys = ys[keep]
        d = kernels.segments_min_dists(ys, edges[:, 0], edges[:, 1])
        if np.any(d > delta * r):
            ok += 1
    return ok / n_probes


@dataclass(frozen=True)
class BitSequence:
    bits: tuple  # entries in {-1, +1}; bits[i] decides the level-(i+2) diamonds
    seed: int | None = None

    @staticmethod
    def random(length: int, seed: int) -> "BitSequence":
        rng = np.random.default_rng(np.random.Philox(seed))
        return BitSequence(tuple(int(b) for b in rng.choice([-1, 1], size=length)), seed)

    def flipped(self, level_index: int) -> "BitSequence":
        b = list(self.bits)
        b[level_index] = -b[level_index]
        return BitSequence(tuple(b), self.seed)


def monotone_path_edges(construction: DiamondConstruction, bits: BitSequence) -> list[np.ndarray]:
    """Per level, the oriented edges the monotone curve traverses."""
    depth = construction.depth
    if len(bits.bits) < depth - 1:
        raise ValueError("bit sequence shorter than the construction depth")
    paths = [construction.levels[0].edges.copy()]
    for i in range(depth - 1):
        a = construction.a_schedule[i]
        N = construction.N_schedule[i]
        sign = bits.bits[i]
        cur = paths[-1]
        dvec = (cur[:, 1, :] - cur[:, 0, :]) / N
        t = np.arange(N)
        p0 = (cur[:, None, 0, :] + t[None, :, None] * dvec[:, None, :]).reshape(-1, 2)
        dv = np.repeat(dvec, N, axis=0)
        q1 = p0 + dv / 4.0
        q3 = p0 + 3.0 * dv / 4.0
        apex = p0 + dv / 2.0 + sign * a * np.stack([-dv[:, 1], dv[:, 0]], axis=1)
        p1 = p0 + dv
        out = np.empty((len(p0), 4, 2, 2))
        out[:, 0, 0], out[:, 0, 1] = p0, q1
        out[:, 1, 0], out[:, 1, 1] = q1, apex
        out[:, 2, 0], out[:, 2, 1] = apex, q3
        out[:, 3, 0], out[:, 3, 1] = q3, p1
        paths.append(out.reshape(-1, 2, 2))
    return paths


def sample_monotone_curve(construction: DiamondConstruction, bits: BitSequence) -> Polyline:
    """The monotone curve through the finest built level."""
    edges = monotone_path_edges(construction, bits)[-1]
    verts = np.vstack([edges[:, 0, :], edges[-1:, 1, :]])
    return Polyline(verts)


def monotone_length_factor(a: float) -> float:
    """Per-diamond length multiplier of a monotone path."""
    return 0.5 + 0.5 * math.sqrt(1.0 + 16.0 * a * a)


# ---------------------------------------------------------------------------
# the blow-up measurement


class _MonotoneClipper:
    """Fast clip of an x-monotone path against balls, via x bisection."""

    def __init__(self, curve: Polyline):
        self.v = curve.vertices
        self.x = self.v[:, 0]

    def clip_endpoints(self, center, radius):
        lo = np.searchsorted(self.x, center[0] - radius) - 1
        hi = np.searchsorted(self.x, center[0] + radius) + 1
        lo = max(lo, 0)
        hi = min(hi, len(self.v) - 1)
        if hi <= lo:
            return np.zeros((0, 2))
        from .polyline import _clip_segments

        pieces = _clip_segments(self.v[lo:hi], self.v[lo + 1 : hi + 1], center, radius)
        return pieces.reshape(-1, 2)


def _beta_restricted_sq(clipper: _MonotoneClipper, center, radius, normal) -> float:
    pts = clipper.clip_endpoints(center, radius)
    if len(pts) == 0:
        return 0.0
    h = (pts - center) @ normal
    return (float(h.max() - h.min()) / 2.0 / (2.0 * radius)) ** 2


@dataclass
class BlowupLevelReport:
    level: int
    a: float
    mean_sum: float  # mean over sampled edges of (paired sum / edge length)
    ratio_to_bound: float  # mean_sum / (a^2 log(1/a))
    trials: int
    seed: int


def expected_blowup(
    construction: DiamondConstruction,
    family,
    fld,
    A: float = 3.0,
    trials: int = 64,
    seed: int = 0,
    edges_per_trial: int = 8,
    p: float = 2.0,
) -> list[BlowupLevelReport]:
    """Monte-Carlo estimate of the per-level paired restricted-beta sums.

    For each level n >= 2 and sampled subdivided edges I of the previous
    level's path, sums (beta_b^p + beta_flip^p) diam(B) over family balls
    meeting the middle half of I with diameter in [a |I|, |I|], for the
    antithetic pair (b, b flipped at level n).  Reports the per-unit-length
    mean against the a^2 log(1/a) floor.
    """
    if A < 3:
        raise ValueError("inflation must be at least 3")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    depth = construction.depth
    if depth < 2:
        return []
    rng = np.random.default_rng(np.random.Philox(seed))
    per_edge_values: dict[int, list] = {n: [] for n in range(2, depth + 1)}
    for t in range(trials):
        bits = BitSequence.random(depth - 1, seed * 100003 + t)
        paths_b = monotone_path_edges(construction, bits)
        verts_b = np.vstack([paths_b[-1][:, 0, :], paths_b[-1][-1:, 1, :]])
        clip_b = _MonotoneClipper(Polyline(verts_b))
        for n in range(2, depth + 1):
            a = construction.a_schedule[n - 2]
            N = construction.N_schedule[n - 2]
            flip = bits.flipped(n - 2)
            curve_f = sample_monotone_curve(construction, flip)
            clip_f = _MonotoneClipper(curve_f)
            prev_path = paths_b[n - 2]
            picks_e = rng.integers(0, len(prev_path), size=edges_per_trial)
            picks_t = rng.integers(0, N, size=edges_per_trial)
            for ei, ti in zip(picks_e, picks_t):
                e = prev_path[ei]
                dvec = (e[1] - e[0]) / N
                p0 = e[0] + ti * dvec
                p1 = p0 + dvec
                L = float(np.linalg.norm(p1 - p0))
                total = _edge_pair_sum(
                    family, fld, clip_b, clip_f, p0, p1, a, A, p
                )
                per_edge_values[n].append(total / L)
    reports = []
    for n in range(2, depth + 1):
        a = construction.a_schedule[n - 2]
        vals = per_edge_values[n]
        mean_sum = float(np.mean(vals)) if vals else 0.0
        bound = a * a * math.log(1.0 / a)
        reports.append(BlowupLevelReport(n, a, mean_sum, mean_sum / bound, trials, seed))
    return reports


def _edge_pair_sum(family, fld, clip_b, clip_f, p0, p1, a, A, p):
    import math as _m

    mid = (p0 + p1) / 2.0
    L = float(np.linalg.norm(p1 - p0))
    total = []
    for k in family.levels:
        r = family.radius(k)
        if not a * L <= 2.0 * r <= L:
            continue
        centers = family.level_centers(k)
        tree = family.level_tree(k)
        cand = tree.query_ball_point(mid, L / 4.0 + r)
        if not cand:
            continue
        cand = np.asarray(cand, dtype=np.intp)
        # middle half of the edge: within L/4 of the midpoint along the edge
        u = (p1 - p0) / L
        rel = centers[cand] - mid
        along = rel @ u
        across = rel - np.outer(along, u)
        ok = (np.abs(along) <= L / 4.0 + r) & (np.linalg.norm(across, axis=1) <= r + a * L)
        for c in centers[cand[ok]]:
            V = fld.for_ball(c, r)
            if V is None:
                raise KeyError("field incomplete")
            normal = np.array([-V.basis[0][1], V.basis[0][0]])
            b1 = _beta_restricted_sq(clip_b, c, A * r, normal) ** (p / 2.0)
            b2 = _beta_restricted_sq(clip_f, c, A * r, normal) ** (p / 2.0)
            total.append((b1 + b2) * (2.0 * r))
    return math.fsum(total)


def blowup_report_csv(reports: list[BlowupLevelReport]) -> str:
    lines = ["level,a_n,mean_sum,ratio_to_bound,trials,seed"]
    for r in reports:
        lines.append(f"{r.level},{r.a!r},{r.mean_sum!r},{r.ratio_to_bound!r},{r.trials},{r.seed}")
    return "\n".join(lines) + "\n"
