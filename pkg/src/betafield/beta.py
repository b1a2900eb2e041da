"""Unilateral and bilateral flatness numbers over balls.

beta measures how close a point sample is to lying on a line (sup distance
to the best line, normalized by ball diameter); theta additionally charges
the line for leaving the sample.  Restricted variants only admit lines
parallel to a pre-assigned subspace.  All quantities are normalized by
diam(B) = 2 * radius and vanish by convention when the sample misses the
ball.

2d values are exact (convex hull + rotating calipers); in higher ambient
dimension a direction-grid search with local refinement returns a certified
upper bound, tagged by method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import AffineFlat, Ball, Subspace
from .nets import CubeTree, PointSet
from .polyline import Polyline

GRID_DIRECTIONS = 4096
REFINE_ROUNDS = 20
CHORD_GRID = 256


@dataclass(frozen=True)
class FlatFit:
    """A flatness value together with the flat achieving it."""

    value: float
    flat: AffineFlat
    method: str  # "exact2d" | "grid" | "pca_bound"
    degenerate: bool = False


def _clip(points: np.ndarray, ball: Ball) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return pts.reshape(0, len(ball.center))
    keep = np.linalg.norm(pts - ball.center, axis=1) <= ball.radius * (1 + 1e-12)
    return pts[keep]


def _horizontal_line(ball: Ball) -> AffineFlat:
    n = len(ball.center)
    u = np.zeros(n)
    u[0] = 1.0
    return AffineFlat.line(ball.center, u)


def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns hull vertices in ccw order.

    Degenerate inputs (all collinear) give the two extreme points.
    """
    pts = np.unique(np.atleast_2d(points), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 2:  # all points equal after dedup
        return pts[:1]
    return hull


def min_width_2d(points: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact minimal width over directions: (width, line direction, anchor).

    The anchor is the midline point, so the returned line is the minimax
    line: sup distance from the points equals width / 2.
    """
    hull = convex_hull_2d(points)
    if len(hull) <= 1:
        p = hull[0] if len(hull) else np.zeros(2)
        return 0.0, np.array([1.0, 0.0]), p
    if len(hull) == 2:
        u = hull[1] - hull[0]
        return 0.0, u / np.linalg.norm(u), hull[0]
    best = (np.inf, None, None)
    m = len(hull)
    for i in range(m):
        a, b = hull[i], hull[(i + 1) % m]
        u = b - a
        nu = np.linalg.norm(u)
        if nu == 0:
            continue
        u = u / nu
        nrm = np.array([-u[1], u[0]])
        h = (hull - a) @ nrm
        w = h.max() - h.min()
        if w < best[0]:
            anchor = a + nrm * (h.max() + h.min()) / 2.0
            best = (float(w), u, anchor)
    return best


def _unit_sphere_grid(dim: int, count: int) -> np.ndarray:
    """Deterministic direction grid on S^(dim-1)."""
    if dim == 1:
        return np.array([[1.0]])
    if dim == 2:
        t = np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if dim == 3:
        # Fibonacci sphere
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        theta = np.pi * (1 + 5**0.5) * i
        return np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)],
            axis=1,
        )
    rng = np.random.default_rng(1234567)
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _residual_fit(points: np.ndarray, u: np.ndarray) -> tuple[float, np.ndarray]:
    """Best line parallel to u: (sup distance, anchor point on the line).

    Exact in 2d (interval midpoint of scalar residuals); otherwise the
    anchor is an approximate Chebyshev center and the sup is the certified
    max from it.
    """
    u = u / np.linalg.norm(u)
    t = points @ u
    resid = points - np.outer(t, u)
    if points.shape[1] == 2:
        nrm = np.array([-u[1], u[0]])
        h = points @ nrm
        lo, hi = h.min(), h.max()
        return float((hi - lo) / 2.0), nrm * (lo + hi) / 2.0
    center, radius = kernels.meb(resid, 64)
    # re-project the center into the orthogonal complement of u
    center = center - np.dot(center, u) * u
    radius = float(np.sqrt(((resid - center) ** 2).sum(axis=1).max()))
    return radius, center


def _refine_direction(points: np.ndarray, u0: np.ndarray, within: Subspace | None = None,
                      rounds: int = REFINE_ROUNDS):
    """Local cap search around u0 minimizing the residual sup.

    When `within` is given, probe directions stay inside that subspace.
    """
    dim = points.shape[1]
    u = u0 / np.linalg.norm(u0)
    best, _ = _residual_fit(points, u)
    rho = np.pi / GRID_DIRECTIONS * 4
    rng = np.random.default_rng(987654321)
    for _ in range(rounds):
        if within is not None:
            probes = rng.standard_normal((8, within.dim)) @ within.basis
        else:
            probes = rng.standard_normal((8, dim))
        probes -= np.outer(probes @ u, u)
        norms = np.linalg.norm(probes, axis=1)
        keep = norms > 1e-12
        probes = (probes[keep].T / norms[keep]).T
        for p in probes:
            cand = u * np.cos(rho) + p * np.sin(rho)
            val, _ = _residual_fit(points, cand)
            if val < best:
                best, u = val, cand
        rho *= 0.7
    return best, u


def _best_direction(pts: np.ndarray, dirs: np.ndarray, extra=()) -> np.ndarray:
    """Cheap filter (mean-anchored sup) then exact re-fit of the top few."""
    mean = pts.mean(axis=0)
    quick = [kernels.sup_dist_to_line(pts, mean, u) for u in dirs]
    order = np.argsort(quick)
    best_val, best_u = np.inf, dirs[0]
    for u in list(extra) + [dirs[j] for j in order[:8]]:
        val, _ = _residual_fit(pts, u)
        if val < best_val:
            best_val, best_u = val, u
    return best_u


def beta(F, ball: Ball) -> FlatFit:
    """Unilateral flatness: inf over lines of sup dist(x, L) / diam(B)."""
    pts = _clip(F, ball)
    n = len(ball.center)
    if len(pts) == 0:
        return FlatFit(0.0, _horizontal_line(ball), "exact2d")
    if pts.shape[1] == 2:
        width, u, anchor = min_width_2d(pts)
        return FlatFit(width / 2.0 / ball.diam, AffineFlat.line(anchor, u), "exact2d")
    if len(pts) == 1:
        return FlatFit(0.0, AffineFlat.line(pts[0], np.eye(n)[0]), "pca_bound")
    # n >= 3: PCA start + grid scan + local refinement; certified upper bound
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    grid = _unit_sphere_grid(n, GRID_DIRECTIONS)
    u = _best_direction(pts, grid, extra=[vt[0]])
    _, u = _refine_direction(pts, u)
    sup, anchor = _residual_fit(pts, u)
    return FlatFit(sup / ball.diam, AffineFlat.line(anchor, u), "grid")


def beta_restricted(F, ball: Ball, V: Subspace) -> FlatFit:
    """Unilateral fit over lines parallel to V only."""
    pts = _clip(F, ball)
    if len(pts) == 0:
        return FlatFit(0.0, _horizontal_line(ball), "exact2d")
    if V.dim == 0:
        center, radius = kernels.meb(pts, 200)
        flat = AffineFlat(center, Subspace.zero(pts.shape[1]))
        return FlatFit(radius / ball.diam, flat, "grid", degenerate=True)
    if V.dim == 1:
        u = V.basis[0]
        sup, anchor = _residual_fit(pts, u)
        method = "exact2d" if pts.shape[1] == 2 else "grid"
        return FlatFit(sup / ball.diam, AffineFlat.line(anchor, u), method)
    if V.dim == pts.shape[1] and pts.shape[1] == 2:
        return beta(F, ball)
    dirs = _unit_sphere_grid(V.dim, GRID_DIRECTIONS) @ V.basis
    u = _best_direction(pts, dirs)
    _, u = _refine_direction(pts, u, within=V)
    sup, anchor = _residual_fit(pts, u)
    return FlatFit(sup / ball.diam, AffineFlat.line(anchor, u), "grid")


def _chord_points(ball: Ball, anchor: np.ndarray, u: np.ndarray, count: int = CHORD_GRID) -> np.ndarray:
    """Grid on the chord (line cap ball), endpoints included; empty if miss."""
    u = u / np.linalg.norm(u)
    rel = ball.center - anchor
    t0 = np.dot(rel, u)
    foot = anchor + t0 * u
    d = np.linalg.norm(foot - ball.center)
    if d > ball.radius:
        return np.zeros((0, len(ball.center)))
    half = np.sqrt(max(ball.radius**2 - d**2, 0.0))
    t = np.linspace(-half, half, count)
    return foot + np.outer(t, u)


def _theta_of_line(pts_in: np.ndarray, F_all: np.ndarray, ball: Ball, anchor, u) -> float:
    term1 = kernels.sup_dist_to_line(pts_in, anchor, u) if len(pts_in) else 0.0
    chord = _chord_points(ball, np.asarray(anchor, dtype=float), np.asarray(u, dtype=float))
    if len(chord) == 0:
        return np.inf  # line misses the ball entirely; useless candidate
    term2 = kernels.sup_min_dist(chord, F_all)
    return (term1 + term2) / ball.diam


def theta(F, ball: Ball) -> FlatFit:
    """Bilateral flatness.  The set-to-line sup runs over F inside the ball;
    the line-to-set sup is measured against all of F (256-point chord grid).
    """
    F_all = np.atleast_2d(np.asarray(F, dtype=float))
    pts = _clip(F_all, ball)
    if len(pts) == 0:
        return FlatFit(0.0, _horizontal_line(ball), "exact2d")

    candidates: list[tuple[np.ndarray, np.ndarray]] = []
    if pts.shape[1] == 2:
        _, u0, a0 = min_width_2d(pts)
        candidates.append((a0, u0))
    else:
        fit = beta(F, ball)
        candidates.append((fit.flat.anchor, fit.flat.direction.basis[0]))
    hull = convex_hull_2d(pts) if pts.shape[1] == 2 else pts
    cap = 24
    sel = hull if len(hull) <= cap else hull[:: max(1, len(hull) // cap)]
    for i in range(len(sel)):
        for j in range(i + 1, len(sel)):
            d = sel[j] - sel[i]
            n = np.linalg.norm(d)
            if n > 0:
                candidates.append((sel[i], d / n))

    best = (np.inf, None, None)
    for anchor, u in candidates:
        val = _theta_of_line(pts, F_all, ball, anchor, u)
        if val < best[0]:
            best = (val, anchor, u)
    val, anchor, u = best
    if pts.shape[1] == 2:
        val, anchor, u = _theta_refine_2d(pts, F_all, ball, anchor, u, val)
    return FlatFit(float(val), AffineFlat.line(anchor, u), "exact2d" if pts.shape[1] == 2 else "grid")


def _theta_refine_2d(pts, F_all, ball, anchor, u, val):
    """Coordinate golden-section descent on (angle, offset)."""
    phi0 = np.arctan2(u[1], u[0])
    nrm = np.array([-u[1], u[0]])
    c0 = float(np.dot(anchor - ball.center, nrm))

    def eval_at(phi, c):
        uu = np.array([np.cos(phi), np.sin(phi)])
        nn = np.array([-uu[1], uu[0]])
        return _theta_of_line(pts, F_all, ball, ball.center + c * nn, uu)

    window_phi = np.pi / 64
    window_c = ball.radius / 8
    best = (val, phi0, c0)
    for _ in range(2):
        phi_lo, phi_hi = best[1] - window_phi, best[1] + window_phi
        for _ in range(REFINE_ROUNDS):
            m1 = phi_lo + 0.382 * (phi_hi - phi_lo)
            m2 = phi_lo + 0.618 * (phi_hi - phi_lo)
            if eval_at(m1, best[2]) < eval_at(m2, best[2]):
                phi_hi = m2
            else:
                phi_lo = m1
        phi = (phi_lo + phi_hi) / 2
        if eval_at(phi, best[2]) < best[0]:
            best = (eval_at(phi, best[2]), phi, best[2])
        c_lo, c_hi = best[2] - window_c, best[2] + window_c
        for _ in range(REFINE_ROUNDS):
            m1 = c_lo + 0.382 * (c_hi - c_lo)
            m2 = c_lo + 0.618 * (c_hi - c_lo)
            if eval_at(best[1], m1) < eval_at(best[1], m2):
                c_hi = m2
            else:
                c_lo = m1
        c = (c_lo + c_hi) / 2
        if eval_at(best[1], c) < best[0]:
            best = (eval_at(best[1], c), best[1], c)
        window_phi *= 0.25
        window_c *= 0.25
    val, phi, c = best
    u = np.array([np.cos(phi), np.sin(phi)])
    nn = np.array([-u[1], u[0]])
    return val, ball.center + c * nn, u


def theta_restricted(F, ball: Ball, V: Subspace) -> FlatFit:
    """Bilateral fit over lines parallel to V only."""
    F_all = np.atleast_2d(np.asarray(F, dtype=float))
    pts = _clip(F_all, ball)
    if len(pts) == 0:
        return FlatFit(0.0, _horizontal_line(ball), "exact2d")
    if V.dim == 0:
        center, radius = kernels.meb(pts, 200)
        d_center = float(kernels.min_dists(center[None, :], F_all)[0])
        flat = AffineFlat(center, Subspace.zero(pts.shape[1]))
        return FlatFit((radius + d_center) / ball.diam, flat, "grid", degenerate=True)
    if V.dim == 1:
        val, anchor, u = _theta_fixed_direction(pts, F_all, ball, V.basis[0])
        method = "exact2d" if pts.shape[1] == 2 else "grid"
        return FlatFit(val, AffineFlat.line(anchor, u), method)
    grid_v = _unit_sphere_grid(V.dim, 64)
    best = (np.inf, None, None)
    for g in grid_v:
        u = g @ V.basis
        val, anchor, uu = _theta_fixed_direction(pts, F_all, ball, u)
        if val < best[0]:
            best = (val, anchor, uu)
    return FlatFit(best[0], AffineFlat.line(best[1], best[2]), "grid")


def _theta_fixed_direction(pts, F_all, ball, u):
    """Offset optimization for a fixed line direction."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    sup0, anchor0 = _residual_fit(pts, u)

    if pts.shape[1] == 2:
        nrm = np.array([-u[1], u[0]])

        def eval_c(c):
            return _theta_of_line(pts, F_all, ball, ball.center + c * nrm, u)

        h = (pts - ball.center) @ nrm
        c_candidates = [float(np.dot(anchor0 - ball.center, nrm))]
        c_candidates += [float((h.min() + h.max()) / 2), 0.0]
        step = max((h.max() - h.min()) / 8.0, ball.radius / 64)
        c_candidates += list(np.arange(h.min(), h.max() + step / 2, step))
        best_c = min(c_candidates, key=eval_c)
        lo, hi = best_c - step, best_c + step
        for _ in range(REFINE_ROUNDS):
            m1 = lo + 0.382 * (hi - lo)
            m2 = lo + 0.618 * (hi - lo)
            if eval_c(m1) < eval_c(m2):
                hi = m2
            else:
                lo = m1
        c = (lo + hi) / 2
        if eval_c(best_c) < eval_c(c):
            c = best_c
        return eval_c(c), ball.center + c * nrm, u

    # n >= 3: candidate anchors at the Chebyshev center and the residuals of
    # sample points; certified upper bound
    t = pts @ u
    resid_pts = pts - np.outer(t, u)
    anchors = [anchor0] + [resid_pts[i] for i in range(0, len(resid_pts), max(1, len(resid_pts) // 16))]
    best = (np.inf, anchors[0])
    for a in anchors:
        val = _theta_of_line(pts, F_all, ball, a, u)
        if val < best[0]:
            best = (val, a)
    return best[0], best[1], u


def d_gamma_E(curve: Polyline, ball: Ball, E: PointSet) -> float:
    """Normalized sup of dist(x, E) over the curve inside the ball.

    Zero when the curve misses the ball; sampled at arc step diam(B)/256
    (clip endpoints always included).
    """
    step = ball.diam / CHORD_GRID
    pts = curve.sample_in_ball(ball.center, ball.radius, step)
    if len(pts) == 0:
        return 0.0
    d = E.nearest_dists(pts)
    return float(d.max()) / ball.diam


@dataclass(frozen=True)
class BadFitEstimate:
    """Upper bound on the badly-fits parameter at the sampled scales."""

    value: float
    level_lo: int
    level_hi: int
    ball_id: int  # cube id realizing the minimum

    def __float__(self):
        return self.value


def estimate_badly_fits(
    E: PointSet,
    d: int,
    tree: CubeTree,
    grid_resolution: int = 24,
    max_planes_per_ball: int = 64,
    levels: tuple[int, int] | None = None,
) -> BadFitEstimate:
    """min over (cube ball, candidate d-plane) of the max relative gap
    between a grid on the plane patch and E.

    Candidate planes are spanned by (d+1)-tuples of well-separated net
    points near the ball (the same recipe the field construction uses); a
    small estimate means some d-plane patch hugs E, i.e. E does NOT badly
    fit d-planes at these scales.
    """
    if not 1 <= d <= E.dim:
        raise ValueError("d must be between 1 and the ambient dimension")
    if levels is None:
        lo, hi = 0, tree.n_levels - 1
    else:
        lo, hi = levels
    best = (np.inf, -1)
    for j in range(lo, hi + 1):
        for q in tree.level_cubes(j):
            ball = tree.ball(int(q))
            planes = _candidate_planes(E, tree, int(q), d, max_planes_per_ball)
            for flat in planes:
                val = _plane_patch_gap(E, flat, ball, grid_resolution)
                if val < best[0]:
                    best = (val, int(q))
    return BadFitEstimate(best[0], lo, hi, best[1])


def _candidate_planes(E: PointSet, tree: CubeTree, q: int, d: int, cap: int):
    ball = tree.ball(q)
    center = ball.center
    if d == E.dim:
        # the unique d-plane is the ambient space
        return [AffineFlat(center, Subspace(np.eye(E.dim)))]
    sep = 0.9 * ball.diam
    idx = E.ball_indices(center, 20.0 * ball.radius)
    pts = E.points[idx]
    if len(pts) < d + 1:
        return []
    order = np.argsort(np.linalg.norm(pts - center, axis=1), kind="stable")
    pts = pts[order]
    planes = []
    m = len(pts)
    for i0 in range(m):
        if len(planes) >= cap:
            break
        chosen = [pts[i0]]
        for i1 in range(i0 + 1, m):
            if all(np.linalg.norm(pts[i1] - c) >= sep for c in chosen):
                chosen.append(pts[i1])
                if len(chosen) == d + 1:
                    break
        if len(chosen) == d + 1:
            base = np.array(chosen)
            dirs = base[1:] - base[0]
            sub = Subspace.from_vectors(dirs)
            if sub.dim == d:
                planes.append(AffineFlat(base[0], sub))
    return planes


def _plane_patch_gap(E: PointSet, flat: AffineFlat, ball: Ball, resolution: int) -> float:
    from .geometry import flat_ball_sample

    spacing = ball.diam / resolution
    sample = flat_ball_sample(flat, ball, spacing)
    if len(sample) == 0:
        return np.inf
    # diam of the plane patch: chord through the ball at the flat's offset
    rel = ball.center - flat.anchor
    off = np.linalg.norm(rel - flat.direction.project(rel))
    patch_diam = 2.0 * np.sqrt(max(ball.radius**2 - off**2, 0.0))
    if patch_diam == 0:
        return np.inf
    d = E.nearest_dists(sample)
    return float(d.max()) / patch_diam
