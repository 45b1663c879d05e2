"""Independent reference implementations used to cross-check the product code.

Everything here is deliberately written with different algebra or brute
force so it cannot share a bug with the code under test.
"""
from __future__ import annotations

import itertools
import math


def brute_force_assignment_total(matrix) -> float:
    """Maximum one-to-one assignment total by enumerating permutations.

    Totals use fsum so the result does not depend on summation order and can
    be compared exactly against any equally ordered optimum.
    """
    rows = [list(map(float, row)) for row in matrix]
    if not rows or not rows[0]:
        return 0.0
    n, m = len(rows), len(rows[0])
    if n > m:
        rows = [[rows[i][j] for i in range(n)] for j in range(m)]
        n, m = m, n
    return max(
        math.fsum(rows[i][perm[i]] for i in range(n))
        for perm in itertools.permutations(range(m), n)
    )


def _axis_voxel_count(lo: float, hi: float, h: float) -> int:
    # voxel centers sit at (k + 0.5) * h on a grid shared by every box
    return max(0, math.floor(hi / h - 0.5) - math.ceil(lo / h - 0.5) + 1)


def voxel_iou(box_a, box_b, resolution: float = 0.01) -> float:
    """IoU by counting voxel centers inside each axis-aligned box.

    Counting factorizes exactly per axis for axis-aligned boxes, so this is
    the plain 3D voxel count computed without the cubic loop.
    """
    (ca, ea), (cb, eb) = box_a, box_b
    n_a, n_b, n_i = 1, 1, 1
    for axis in range(3):
        a_lo, a_hi = ca[axis] - ea[axis] / 2, ca[axis] + ea[axis] / 2
        b_lo, b_hi = cb[axis] - eb[axis] / 2, cb[axis] + eb[axis] / 2
        n_a *= _axis_voxel_count(a_lo, a_hi, resolution)
        n_b *= _axis_voxel_count(b_lo, b_hi, resolution)
        n_i *= _axis_voxel_count(max(a_lo, b_lo), min(a_hi, b_hi), resolution)
    union = n_a + n_b - n_i
    return n_i / union if union > 0 else 0.0


def ray_range_line_equation(origin, angle: float, walls, max_range: float) -> float:
    """Ray cast via implicit line equations and an on-segment distance test."""
    ox, oy = origin[0], origin[1]
    cos_t, sin_t = math.cos(angle), math.sin(angle)
    best = max_range
    for (x1, y1), (x2, y2) in walls:
        a = y1 - y2
        b = x2 - x1
        c = -a * x1 - b * y1
        frac = a * cos_t + b * sin_t
        if abs(frac) < 1e-12:
            continue
        t = -(a * ox + b * oy + c) / frac
        if t < 0:
            continue
        px, py = ox + t * cos_t, oy + t * sin_t
        on_segment = (
            math.hypot(px - x1, py - y1) + math.hypot(px - x2, py - y2)
            <= math.hypot(x2 - x1, y2 - y1) + 1e-9
        )
        if on_segment and t < best:
            best = t
    return best


def _point_segment_distance(px, py, x1, y1, x2, y2) -> float:
    vx, vy = x2 - x1, y2 - y1
    length_sq = vx * vx + vy * vy
    if length_sq == 0.0:
        return math.hypot(px - x1, py - y1)
    t = ((px - x1) * vx + (py - y1) * vy) / length_sq
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (x1 + t * vx), py - (y1 + t * vy))


def min_wall_distance_scalar(point, walls) -> float:
    if not walls:
        return math.inf
    px, py = point[0], point[1]
    return min(_point_segment_distance(px, py, s[0][0], s[0][1], s[1][0], s[1][1]) for s in walls)


def substep_stop_distance(start, yaw, distance, walls, radius, margin, substep) -> float:
    """Naive per-substep re-simulation of the pre-emptive motion truncation."""
    total = abs(distance)
    sign = 1.0 if distance >= 0 else -1.0
    dir_x, dir_y = sign * math.cos(yaw), sign * math.sin(yaw)
    needed = radius + margin
    arc = 0.0
    travelled = 0.0
    while arc < total - 1e-12:
        arc = min(arc + substep, total)
        px, py = start[0] + arc * dir_x, start[1] + arc * dir_y
        if min_wall_distance_scalar((px, py), walls) + 1e-9 < needed:
            break
        travelled = arc
    return travelled
