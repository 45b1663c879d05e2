"""Planar geometry for the simulated world: segment distances and ray casts."""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


def walls_array(walls) -> np.ndarray:
    """Wall segments as an (M, 2, 2) float array; tolerates an empty list."""
    if len(walls) == 0:
        return np.zeros((0, 2, 2))
    return np.asarray(walls, dtype=float).reshape(-1, 2, 2)


def points_to_segments_distance(points, segments: np.ndarray) -> np.ndarray:
    """Distances from N points to M segments as an (N, M) array."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if segments.shape[0] == 0:
        return np.full((pts.shape[0], 0), np.inf)
    a = segments[:, 0, :]
    ab = segments[:, 1, :] - a
    ap = pts[:, None, :] - a[None, :, :]
    denom = np.einsum("md,md->m", ab, ab)
    # degenerate (point) segments fall back to point distance via t = 0
    t = np.einsum("nmd,md->nm", ap, ab) / np.where(denom == 0.0, 1.0, denom)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.linalg.norm(pts[:, None, :] - closest, axis=-1)


def min_wall_distance(point, segments: np.ndarray) -> float:
    """Distance from a single point to the nearest segment (inf when none)."""
    d = points_to_segments_distance(np.asarray(point, dtype=float)[None, :2], segments)
    return float(d.min()) if d.size else math.inf


def cast_ray(origin, angle: float, segments: np.ndarray, max_range: float) -> float:
    """Range along a ray to the nearest segment hit, capped at max_range.

    Solves o + t*d = p + s*v per segment; a hit needs t >= 0 and s in [0, 1].
    Rays parallel to a segment (including collinear) count as misses.
    """
    if segments.shape[0] == 0:
        return max_range
    o = np.asarray(origin, dtype=float)[:2]
    d = np.array([math.cos(angle), math.sin(angle)])
    p = segments[:, 0, :]
    v = segments[:, 1, :] - p
    w = p - o
    denom = d[0] * v[:, 1] - d[1] * v[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0] * v[:, 1] - w[:, 1] * v[:, 0]) / denom
        s = (w[:, 0] * d[1] - w[:, 1] * d[0]) / denom
    hit = (np.abs(denom) > 1e-12) & (t >= 0.0) & (s >= 0.0) & (s <= 1.0)
    if not hit.any():
        return max_range
    return float(min(t[hit].min(), max_range))


def point_in_bounds(point, bounds) -> bool:
    """Whether the (x, y) point lies inside the [xmin, ymin, xmax, ymax] rectangle."""
    x, y = float(point[0]), float(point[1])
    xmin, ymin, xmax, ymax = bounds
    return xmin <= x <= xmax and ymin <= y <= ymax
