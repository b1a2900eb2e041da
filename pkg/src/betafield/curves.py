"""Connected curves through point sets and the multiscale flatness sums.

The sums iterate over a multiresolution ball family (or cube-tree balls),
keep only balls the curve actually meets (exact segment/ball quadratics),
and accumulate with ``math.fsum`` so reduction order cannot perturb totals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .beta import CHORD_GRID, min_width_2d, _chord_points
from .geometry import Ball, Subspace, line_angle
from .nets import BallFamily, CubeTree, NetHierarchy, PointSet
from .polyline import Polyline, _clip_segments, exact_diameter


@dataclass
class SumReport:
    """Multiscale sum with per-level breakdown.

    ratio is total / curve length, the headline constant of each bound.
    """

    total: float
    per_level: dict[int, float]
    counted_balls: int
    ratio: float
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"total": self.total, "ratio": self.ratio, "params": self.params}
        )

    def to_csv(self) -> str:
        lines = ["level,partial_sum,count"]
        counts = self.params.get("per_level_counts", {})
        for k in sorted(self.per_level):
            lines.append(f"{k},{self.per_level[k]!r},{counts.get(k, '')}")
        return "\n".join(lines) + "\n"


def _assemble_report(terms_by_level, counts_by_level, length, params) -> SumReport:
    per_level = {k: math.fsum(v) for k, v in terms_by_level.items()}
    total = math.fsum(per_level.values())
    counted = sum(counts_by_level.values())
    ratio = total / length if length > 0 else (0.0 if total == 0 else math.inf)
    params = dict(params)
    params["per_level_counts"] = dict(counts_by_level)
    return SumReport(total, per_level, counted, ratio, params)


# ---------------------------------------------------------------------------
# curve construction


def construct_tst_curve(F: PointSet, h: NetHierarchy) -> Polyline:
    """Connected polyline through every point of F, built hierarchically.

    Starts from the two farthest coarsest net points, then splices each new
    point (finer net levels first, then any leftover points) into the curve
    at its nearest curve point.  Deterministic: nearest ties break toward
    the earlier segment.
    """
    pts = F.points
    coarse = h.levels[h.k_min]
    if len(pts) == 1:
        return Polyline(pts)
    start = pts[coarse]
    if len(start) == 1:
        verts = [start[0]]
    else:
        d2 = ((start[:, None, :] - start[None, :, :]) ** 2).sum(axis=2)
        i, j = np.unravel_index(np.argmax(d2), d2.shape)
        if i > j:
            i, j = j, i
        verts = [start[i], start[j]]

    inserted = {tuple(v) for v in verts}

    def splice(p):
        key = tuple(p)
        if key in inserted:
            return
        inserted.add(key)
        v = np.array(verts)
        if len(v) == 1:
            verts.append(p)
            return
        a, b = v[:-1], v[1:]
        ab = b - a
        ab2 = (ab * ab).sum(axis=1)
        ab2s = np.where(ab2 == 0, 1.0, ab2)
        t = np.clip(((p - a) * ab).sum(axis=1) / ab2s, 0.0, 1.0)
        close = a + t[:, None] * ab
        d2 = ((p - close) ** 2).sum(axis=1)
        s = int(np.argmin(d2))
        ts = t[s]
        if ts <= 0.0 and s > 0:
            # nearest point is an interior vertex: choose the adjacent side
            # that adds less length
            add_prev = np.linalg.norm(v[s - 1] - p) + np.linalg.norm(p - v[s])
            add_prev -= np.linalg.norm(v[s] - v[s - 1])
            add_next = np.linalg.norm(v[s] - p) + np.linalg.norm(p - v[s + 1])
            add_next -= np.linalg.norm(v[s + 1] - v[s])
            if add_prev <= add_next:
                verts.insert(s, p)
            else:
                verts.insert(s + 1, p)
        elif ts <= 0.0 and s == 0:
            verts.insert(0, p)  # prepend before the first vertex
        elif ts >= 1.0 and s == len(ab) - 1:
            verts.append(p)
        else:
            verts.insert(s + 1, p)

    levels = sorted(h.levels)
    for k in levels[1:]:
        for idx in h.levels[k]:
            splice(pts[idx])
    for idx in range(len(pts)):
        splice(pts[idx])
    return Polyline(np.array(verts))


def tst_length_ratio(curve: Polyline, F: PointSet, family: BallFamily, A: float = 2.0) -> float:
    """Measured constant of the curve-length bound: length over
    (diam(F) + sum of beta^2 diam over the family)."""
    diam = F.diameter()
    ssum = pointset_beta_sum(F, family, A)
    denom = diam + ssum.total
    return curve.length / denom if denom > 0 else 0.0


def pointset_beta_sum(F: PointSet, family: BallFamily, A: float, p: float = 2.0) -> SumReport:
    """sum of beta_F(AB)^p diam(B) over all family balls (F is the set the
    family was built on, so every ball meets it)."""
    terms: dict[int, list] = {}
    counts: dict[int, int] = {}
    tree = F.tree
    for k in family.levels:
        r = family.radius(k)
        centers = family.level_centers(k)
        terms[k] = []
        counts[k] = 0
        for c in centers:
            idx = tree.query_ball_point(c, A * r)
            sub = F.points[idx]
            b = Ball(c, A * r)
            width, _, _ = min_width_2d(sub) if F.dim == 2 else (None, None, None)
            if width is None:
                from .beta import beta as beta_fit

                val = beta_fit(sub, b).value
            else:
                val = width / 2.0 / b.diam
            terms[k].append(val**p * (2.0 * r))
            counts[k] += 1
    return _assemble_report(terms, counts, max(F.diameter(), 1e-300), {"A": A, "p": p})


# ---------------------------------------------------------------------------
# curve scanning


class CurveScanner:
    """Finds which balls a polyline meets, and clips it locally, fast.

    Midpoint KD-tree prefilter + exact per-segment ball quadratics.
    """

    def __init__(self, curve: Polyline):
        self.curve = curve
        v = curve.vertices
        if curve.n_segments == 0:
            self._mid = v.copy()
            self._half = np.zeros(1)
        else:
            self._mid = (v[:-1] + v[1:]) / 2.0
            self._half = np.linalg.norm(v[1:] - v[:-1], axis=1) / 2.0
        self._tree = cKDTree(self._mid)
        self._maxhalf = float(self._half.max()) if len(self._half) else 0.0

    def segments_near(self, center, radius: float) -> np.ndarray:
        cand = self._tree.query_ball_point(np.asarray(center, dtype=float), radius + self._maxhalf)
        return np.asarray(sorted(cand), dtype=np.intp)

    def meets(self, center, radius: float) -> bool:
        cand = self.segments_near(center, radius)
        if len(cand) == 0:
            return False
        v = self.curve.vertices
        if self.curve.n_segments == 0:
            return bool(np.linalg.norm(v[0] - center) <= radius)
        d = kernels.segments_min_dists(
            np.asarray(center, dtype=float)[None, :], v[cand], v[cand + 1]
        )
        return bool(d[0] <= radius)

    def clip(self, center, radius: float) -> np.ndarray:
        """(m, 2, n) clipped piece endpoints inside the ball."""
        v = self.curve.vertices
        if self.curve.n_segments == 0:
            if np.linalg.norm(v[0] - center) <= radius:
                return np.stack([v, v], axis=1)
            return np.zeros((0, 2, self.curve.dim))
        cand = self.segments_near(center, radius)
        if len(cand) == 0:
            return np.zeros((0, 2, self.curve.dim))
        return _clip_segments(v[cand], v[cand + 1], np.asarray(center, dtype=float), radius)

    def meeting_centers(
        self, centers: np.ndarray, radius: float, centers_tree: cKDTree | None = None
    ) -> np.ndarray:
        """Indices of centers whose ball meets the curve (exact).

        With a KD tree over the centers, candidates come from arc samples of
        the curve (spacing = radius, query radius 2 * radius covers every
        center within radius of the curve); candidates are then re-tested
        exactly against their local segments.
        """
        centers = np.atleast_2d(centers)
        v = self.curve.vertices
        if centers_tree is not None:
            samples = self.curve.arc_samples(radius)
            groups = centers_tree.query_ball_point(samples, 2.0 * radius)
            cand_idx = np.unique(np.concatenate([np.asarray(g, dtype=np.intp) for g in groups]
                                                 or [np.zeros(0, dtype=np.intp)]))
            if len(cand_idx) == 0:
                return cand_idx
        else:
            cand_idx = np.arange(len(centers), dtype=np.intp)
        if self.curve.n_segments == 0:
            d = np.linalg.norm(centers[cand_idx] - v[0], axis=1)
            return cand_idx[d <= radius]
        groups = self._tree.query_ball_point(centers[cand_idx], radius + self._maxhalf)
        out = []
        for pos, cand in enumerate(groups):
            if not cand:
                continue
            cand = np.asarray(cand, dtype=np.intp)
            d = kernels.segments_min_dists(centers[cand_idx[pos]][None, :], v[cand], v[cand + 1])
            if d[0] <= radius:
                out.append(cand_idx[pos])
        return np.asarray(out, dtype=np.intp)


def curve_beta_of_ball(scanner: CurveScanner, ball: Ball) -> float:
    """Exact beta of the curve in the ball (2d): clip endpoints carry the sup."""
    pts = scanner.clip(ball.center, ball.radius).reshape(-1, scanner.curve.dim)
    if len(pts) == 0:
        return 0.0
    if scanner.curve.dim == 2:
        width, _, _ = min_width_2d(pts)
        return width / 2.0 / ball.diam
    from .beta import beta as beta_fit

    return beta_fit(pts, ball).value


def curve_beta_restricted(scanner: CurveScanner, ball: Ball, direction: np.ndarray) -> float:
    """Restricted beta of the curve in the ball for a fixed line direction."""
    pts = scanner.clip(ball.center, ball.radius).reshape(-1, scanner.curve.dim)
    if len(pts) == 0:
        return 0.0
    u = np.asarray(direction, dtype=float)
    lo, hi = kernels.proj_minmax(pts - ball.center, _normal_of(u)) if scanner.curve.dim == 2 else (None, None)
    if lo is None:
        return float(kernels.sup_dist_to_line(pts, pts.mean(axis=0), u)) / ball.diam
    return (hi - lo) / 2.0 / ball.diam


def _normal_of(u: np.ndarray) -> np.ndarray:
    u = u / np.linalg.norm(u)
    return np.array([-u[1], u[0]])


def curve_theta_of_ball(scanner: CurveScanner, ball: Ball, direction: np.ndarray | None = None):
    """theta of the curve in the ball; term2 measured against the exact
    local curve segments (clipped to 2B).  Returns (value, best direction).

    With `direction` given, only the offset is optimized (restricted theta).
    """
    dim = scanner.curve.dim
    pieces = scanner.clip(ball.center, ball.radius)
    pts = pieces.reshape(-1, dim)
    if len(pts) == 0:
        return 0.0, None
    local = scanner.clip(ball.center, 2.0 * ball.radius)
    seg_a, seg_b = local[:, 0, :], local[:, 1, :]

    def theta_of(anchor, u):
        t1 = kernels.sup_dist_to_line(pts, anchor, u)
        chord = _chord_points(ball, anchor, u)
        if len(chord) == 0:
            return math.inf
        t2 = float(kernels.segments_min_dists(chord, seg_a, seg_b).max())
        return (t1 + t2) / ball.diam

    if direction is not None:
        dirs = [np.asarray(direction, dtype=float)]
    elif dim == 2:
        _, u0, _ = min_width_2d(pts)
        dirs = [u0]
    else:
        from .beta import beta as beta_fit

        dirs = [beta_fit(pts, ball).flat.direction.basis[0]]

    best = (math.inf, None, None)
    for u in dirs:
        u = u / np.linalg.norm(u)
        if dim == 2:
            nrm = _normal_of(u)
            h = (pts - ball.center) @ nrm
            cands = np.unique(np.concatenate([[(h.min() + h.max()) / 2.0, 0.0], h]))
            if len(cands) > 18:
                cands = cands[:: len(cands) // 16]
            vals = [theta_of(ball.center + c * nrm, u) for c in cands]
            jbest = int(np.argmin(vals))
            c_lo = cands[jbest] - ball.radius / 16
            c_hi = cands[jbest] + ball.radius / 16
            for _ in range(16):
                m1 = c_lo + 0.382 * (c_hi - c_lo)
                m2 = c_lo + 0.618 * (c_hi - c_lo)
                if theta_of(ball.center + m1 * nrm, u) < theta_of(ball.center + m2 * nrm, u):
                    c_hi = m2
                else:
                    c_lo = m1
            c = (c_lo + c_hi) / 2
            val = min(vals[jbest], theta_of(ball.center + c * nrm, u))
            anchor = ball.center + (c if theta_of(ball.center + c * nrm, u) <= vals[jbest] else cands[jbest]) * nrm
        else:
            anchor = pts.mean(axis=0)
            val = theta_of(anchor, u)
        if val < best[0]:
            best = (val, anchor, u)
    return best[0], best[2]


def theta_restricted_selector(
    scanner: CurveScanner, ball: Ball, direction: np.ndarray, eps: float
) -> bool:
    """Does restricted theta of the curve in the ball reach eps?

    Cheap exact bounds first: the restricted unilateral spread is a lower
    bound, a single mid-offset evaluation an upper bound; full offset
    optimization only when they straddle eps.
    """
    bval = curve_beta_restricted(scanner, ball, direction)
    if bval >= eps:
        return True
    val, _ = curve_theta_of_ball(scanner, ball, direction=direction)
    return val >= eps


# ---------------------------------------------------------------------------
# the sums


def curve_beta_sum(curve: Polyline, family: BallFamily, A: float, p: float = 2.0) -> SumReport:
    """sum of beta_curve(AB)^p diam(B) over family balls meeting the curve
    with diam(B) <= diam(curve)."""
    if A < 1 or p <= 0:
        raise ValueError("need A >= 1 and p > 0")
    scanner = CurveScanner(curve)
    diam_g = curve.diameter()
    terms: dict[int, list] = {}
    counts: dict[int, int] = {}
    for k in family.levels:
        r = family.radius(k)
        if 2.0 * r > diam_g:
            continue
        centers = family.level_centers(k)
        hit = scanner.meeting_centers(centers, r, family.level_tree(k))
        terms[k] = []
        counts[k] = len(hit)
        for i in hit:
            val = curve_beta_of_ball(scanner, Ball(centers[i], A * r))
            terms[k].append(val**p * (2.0 * r))
    return _assemble_report(
        terms, counts, curve.length, {"A": A, "p": p, "diam": diam_g}
    )


def _cube_ball_scan(curve: Polyline, tree: CubeTree, lam: float):
    """Yields (level, cube ids, ball radius) for cubes whose lam-inflated
    balls meet the curve, diam(B(Q)) <= diam(curve)."""
    scanner = CurveScanner(curve)
    diam_g = curve.diameter()
    for j in range(tree.n_levels):
        r = tree.ball_radius(j)
        if 2.0 * r > diam_g:
            continue
        ids = tree.level_cubes(j)
        centers = tree.centers[tree.level_slices[j]]
        hit = scanner.meeting_centers(centers, lam * r, tree.level_tree(j))
        yield j, ids[hit], r, scanner


def curve_theta_cube_sum(curve: Polyline, tree: CubeTree, lam: float) -> SumReport:
    """sum of theta_curve(lam B(Q))^2 diam(B(Q)) over E-cubes whose inflated
    balls meet the curve."""
    if lam <= 1:
        raise ValueError("lam must exceed 1")
    terms: dict[int, list] = {}
    counts: dict[int, int] = {}
    for j, ids, r, scanner in _cube_ball_scan(curve, tree, lam):
        terms[j] = []
        counts[j] = len(ids)
        for q in ids:
            val, _ = curve_theta_of_ball(scanner, Ball(tree.centers[q], lam * r))
            terms[j].append(val**2 * (2.0 * r))
    return _assemble_report(terms, counts, curve.length, {"lam": lam})


def curve_d_sum(curve: Polyline, tree: CubeTree, lam: float, E: PointSet | None = None) -> SumReport:
    """sum of d_{curve,E}(lam B(Q))^2 diam(B(Q)), same ball selection."""
    if lam <= 1:
        raise ValueError("lam must exceed 1")
    if E is None:
        E = tree.pointset
    if E is None:
        raise ValueError("cube tree carries no point set; pass E explicitly")
    terms: dict[int, list] = {}
    counts: dict[int, int] = {}
    for j, ids, r, scanner in _cube_ball_scan(curve, tree, lam):
        terms[j] = []
        counts[j] = len(ids)
        for q in ids:
            ball = Ball(tree.centers[q], lam * r)
            step = ball.diam / CHORD_GRID
            pts = curve.sample_in_ball(ball.center, ball.radius, step)
            val = float(E.nearest_dists(pts).max()) / ball.diam if len(pts) else 0.0
            terms[j].append(val**2 * (2.0 * r))
    return _assemble_report(terms, counts, curve.length, {"lam": lam})


def weak_type_sum(
    curve: Polyline,
    family: BallFamily,
    field,
    A: float,
    eps: float,
) -> SumReport:
    """sum of diam(B) over family balls meeting the curve where the
    field-restricted theta over AB reaches eps.

    The ratio total / length is the headline constant of the weak-type
    bound.  Raises KeyError("field incomplete") when a counted ball has no
    field entry.
    """
    scanner = CurveScanner(curve)
    diam_g = curve.diameter()
    terms: dict[int, list] = {}
    counts: dict[int, int] = {}
    for k in family.levels:
        r = family.radius(k)
        if 2.0 * r > diam_g:
            continue
        centers = family.level_centers(k)
        hit = scanner.meeting_centers(centers, r, family.level_tree(k))
        terms[k] = []
        counts[k] = 0
        if hasattr(field, "entries_for_balls") and len(hit):
            entries = field.entries_for_balls(centers[hit], r)
        else:
            entries = [field.for_ball(centers[i], r) for i in hit]
        for i, V in zip(hit, entries):
            c = centers[i]
            if V is None:
                raise KeyError("field incomplete")
            ball = Ball(c, A * r)
            if V.dim == 0:
                triggered = _degenerate_selector(scanner, ball, eps)
            else:
                triggered = theta_restricted_selector(scanner, ball, V.basis[0], eps)
            if triggered:
                terms[k].append(2.0 * r)
                counts[k] += 1
    return _assemble_report(
        terms, counts, curve.length, {"A": A, "eps": eps, "diam": diam_g}
    )


def _degenerate_selector(scanner: CurveScanner, ball: Ball, eps: float) -> bool:
    pts = scanner.clip(ball.center, ball.radius).reshape(-1, scanner.curve.dim)
    if len(pts) == 0:
        return False
    center, radius = kernels.meb(pts, 64)
    d = float(scanner.curve.dists(center[None, :])[0])
    return (radius + d) / ball.diam >= eps
