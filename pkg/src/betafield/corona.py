"""Stopping-time decomposition of the curve-adjacent cubes.

The cubes whose balls meet a curve are partitioned top-down into regions
where the curve stays flat (theta below delta), close to E (d below d0),
and travels in a stable direction (angle from the region top below alpha);
cubes failing flatness/closeness land in the bad set, direction breaks
start new regions.  The packing sums over region tops and bad cubes,
normalized by curve length, are the decomposition's quality report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .beta import CHORD_GRID
from .curves import CurveScanner, curve_theta_of_ball
from .geometry import Ball, line_angle
from .nets import CubeTree, PointSet
from .polyline import Polyline


@dataclass
class CoronaParams:
    alpha: float = 0.1
    delta: float = 0.02
    d0: float = 0.02
    lam: float = 8.0

    def validate(self):
        if min(self.alpha, self.delta, self.d0) <= 0 or self.lam <= 1:
            raise ValueError("need alpha, delta, d0 > 0 and lam > 1")


@dataclass
class StoppingRegion:
    top: int
    members: set[int]
    direction: np.ndarray  # unit vector of the best-fit line at the top


@dataclass
class CoronaDecomposition:
    regions: list[StoppingRegion]
    bad: set[int]
    params: CoronaParams
    stats: dict[int, tuple[float, float, np.ndarray | None]]  # cube -> (theta, d, dir)
    curve_length: float

    def region_of(self) -> dict[int, int]:
        out = {}
        for i, r in enumerate(self.regions):
            for q in r.members:
                out[q] = i
        return out

    def to_json(self) -> str:
        doc = {
            "regions": [
                {
                    "top": int(r.top),
                    "members": sorted(int(q) for q in r.members),
                    "direction": [float(x) for x in r.direction],
                }
                for r in self.regions
            ],
            "bad": sorted(int(q) for q in self.bad),
        }
        return json.dumps(doc)


def collect_curve_cubes(curve: Polyline, tree: CubeTree) -> set[int]:
    """Cubes with B(Q) meeting the curve and diam(B(Q)) <= diam(curve).

    Validated to be upward-connected within the eligible levels (guaranteed
    because child balls nest inside parent balls by the padded outer
    constant).
    """
    scanner = CurveScanner(curve)
    diam_g = curve.diameter()
    out: set[int] = set()
    for j in range(tree.n_levels):
        r = tree.ball_radius(j)
        if 2.0 * r > diam_g:
            continue
        ids = tree.level_cubes(j)
        centers = tree.centers[tree.level_slices[j]]
        hit = scanner.meeting_centers(centers, r, tree.level_tree(j))
        out.update(int(q) for q in ids[hit])
    for q in out:
        p = int(tree.parent[q])
        if p >= 0 and 2.0 * tree.ball_radius(int(tree.level_of[p])) <= diam_g:
            if p not in out:
                raise AssertionError(f"curve cubes not upward-connected at {q}")
    return out


def _cube_stats(curve: Polyline, tree: CubeTree, cubes: set[int], params: CoronaParams,
                E: PointSet):
    """(theta, d, direction) of the curve in lam B(Q) per cube."""
    scanner = CurveScanner(curve)
    stats = {}
    for q in sorted(cubes):
        j = int(tree.level_of[q])
        ball = Ball(tree.centers[q], params.lam * tree.ball_radius(j))
        theta_val, direction = curve_theta_of_ball(scanner, ball)
        step = ball.diam / CHORD_GRID
        pts = curve.sample_in_ball(ball.center, ball.radius, step)
        d_val = float(E.nearest_dists(pts).max()) / ball.diam if len(pts) else 0.0
        stats[q] = (theta_val, d_val, direction)
    return stats


def decompose(
    cubes: set[int],
    curve: Polyline,
    tree: CubeTree,
    params: CoronaParams | None = None,
    E: PointSet | None = None,
) -> CoronaDecomposition:
    """Top-down greedy partition of the curve cubes.

    A cube passing the flatness and closeness thresholds joins its parent's
    region when its best-fit direction stays within alpha of the region
    top's, becomes a new top otherwise; threshold failures go to the bad
    set.  The E-proximity guard of the stopping rule is always active here
    because cube centers are points of E.
    """
    params = params or CoronaParams()
    params.validate()
    if E is None:
        E = tree.pointset
    if E is None:
        raise ValueError("cube tree carries no point set; pass E explicitly")
    stats = _cube_stats(curve, tree, cubes, params, E)

    order = sorted(cubes, key=lambda q: (int(tree.level_of[q]), q))
    region_of: dict[int, int] = {}
    regions: list[StoppingRegion] = []
    bad: set[int] = set()
    for q in order:
        theta_val, d_val, direction = stats[q]
        if theta_val >= params.delta or d_val >= params.d0 or direction is None:
            bad.add(q)
            continue
        p = int(tree.parent[q])
        if p in region_of:
            ridx = region_of[p]
            top_dir = regions[ridx].direction
            if line_angle(top_dir, direction) < params.alpha:
                regions[ridx].members.add(q)
                region_of[q] = ridx
                continue
        regions.append(StoppingRegion(q, {q}, direction))
        region_of[q] = len(regions) - 1
    return CoronaDecomposition(regions, bad, params, stats, curve.length)


def packing_report(dec: CoronaDecomposition, tree: CubeTree) -> tuple[float, float]:
    """(region-top diameter sum, bad-cube diameter sum), both / curve length."""
    L = dec.curve_length if dec.curve_length > 0 else math.inf
    tops = math.fsum(2.0 * tree.ball_radius(int(tree.level_of[r.top])) for r in dec.regions)
    bads = math.fsum(2.0 * tree.ball_radius(int(tree.level_of[q])) for q in dec.bad)
    return tops / L, bads / L


def verify_conclusions(
    dec: CoronaDecomposition,
    curve: Polyline,
    tree: CubeTree,
    E: PointSet | None = None,
) -> dict:
    """Independent post-hoc re-check of the decomposition's guarantees:
    partition, tree-connectedness with contained members, and the
    per-member thresholds re-evaluated from scratch."""
    params = dec.params
    if E is None:
        E = tree.pointset
    all_assigned = set(dec.bad)
    for r in dec.regions:
        all_assigned |= r.members
    overlap_free = sum(len(r.members) for r in dec.regions) + len(dec.bad) == len(all_assigned)

    connected = True
    for r in dec.regions:
        for q in r.members:
            if q == r.top:
                continue
            walk = q
            seen = False
            while walk >= 0:
                walk = int(tree.parent[walk])
                if walk == r.top:
                    seen = True
                    break
                if walk not in r.members:
                    break
            if not seen:
                connected = False

    cubes = all_assigned
    stats = _cube_stats(curve, tree, cubes, params, E)
    thresholds = True
    angles = True
    for r in dec.regions:
        top_dir = r.direction
        for q in r.members:
            theta_val, d_val, direction = stats[q]
            if theta_val >= params.delta or d_val >= params.d0:
                thresholds = False
            if direction is None or line_angle(top_dir, direction) >= params.alpha:
                angles = False
    return {
        "partition": overlap_free,
        "connected": connected,
        "thresholds": thresholds,
        "angles": angles,
    }
