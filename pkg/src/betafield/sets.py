"""Generators for the example point sets and point-cloud file ingestion."""

from __future__ import annotations

import json

import numpy as np

from .nets import PointSet


def gen_sierpinski_carpet(depth: int) -> PointSet:
    """Centers of the 8^depth surviving sub-squares of the carpet in [0,1]^2."""
    if depth < 0 or depth > 8:
        raise ValueError("depth must be in 0..8")
    cells = np.zeros((1, 2))
    size = 1.0
    keep = [(i, j) for i in range(3) for j in range(3) if not (i == 1 and j == 1)]
    offsets = np.array(keep, dtype=float)
    for _ in range(depth):
        size /= 3.0
        cells = (cells[:, None, :] + offsets[None, :, :] * size).reshape(-1, 2)
    centers = cells + size / 2.0
    return PointSet(centers)


def gen_four_corner_cantor(depth: int) -> PointSet:
    """Corner points of the 1/4-contraction four-corner construction."""
    if depth < 0 or depth > 10:
        raise ValueError("depth must be in 0..10")
    pts = np.zeros((1, 2))
    corners = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0], [3.0, 3.0]]) / 4.0
    for _ in range(depth):
        pts = (pts[:, None, :] / 4.0 + corners[None, :, :]).reshape(-1, 2)
    return PointSet(pts)


def gen_circle(count: int) -> PointSet:
    """count equally spaced points on the unit circle (exact trig coords)."""
    if count < 3:
        raise ValueError("count must be >= 3")
    t = 2.0 * np.pi * np.arange(count) / count
    return PointSet(np.stack([np.cos(t), np.sin(t)], axis=1))


def gen_segment(count: int) -> PointSet:
    """count equally spaced points on the unit segment of the x-axis."""
    if count < 2:
        raise ValueError("count must be >= 2")
    x = np.linspace(0.0, 1.0, count)
    return PointSet(np.stack([x, np.zeros_like(x)], axis=1))


def gen_grid(side: int) -> PointSet:
    """side x side uniform grid in [0,1]^2."""
    if side < 2:
        raise ValueError("side must be >= 2")
    x = np.linspace(0.0, 1.0, side)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    return PointSet(np.stack([xx.ravel(), yy.ravel()], axis=1))


def gen_disk(delta: float, radius: float = 0.5, center=(0.5, 0.5)) -> PointSet:
    """delta-resolution grid sample of a disk (the disk lies in N_delta of it)."""
    if not 0 < delta < radius:
        raise ValueError("need 0 < delta < radius")
    n = int(np.ceil(2 * radius / delta)) + 1
    x = np.linspace(-radius, radius, n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= radius]
    return PointSet(pts + np.asarray(center, dtype=float))


GENERATORS = {
    "carpet": gen_sierpinski_carpet,
    "cantor": gen_four_corner_cantor,
    "circle": gen_circle,
    "segment": gen_segment,
    "grid": gen_grid,
}


def save_pointset(E: PointSet, path) -> None:
    doc = {
        "dim": E.dim,
        "scale": E.scale,
        "points": [[float(x) for x in p] for p in E.points],
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_pointset(path, expect_dim: int | None = None) -> PointSet:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ValueError(f"parse error in {path} at line {e.lineno} column {e.colno}: {e.msg}") from e
    for key in ("dim", "points"):
        if key not in doc:
            raise ValueError(f"point-set file missing '{key}'")
    pts = doc["points"]
    dim = int(doc["dim"])
    if any(len(p) != dim for p in pts):
        raise ValueError("point-set file has rows of inconsistent dimension")
    if expect_dim is not None and dim != expect_dim:
        raise ValueError(f"dimension mismatch: file has dim {dim}, session expects {expect_dim}")
    return PointSet(np.array(pts, dtype=float), scale=float(doc.get("scale", 1.0)))
