"""Vectorized numpy fallback backend.

Every function here has a numba twin in ``numba_impl``; expression
structure is kept identical (same grouping, same division-by-resolution,
integer squared distances) so the two backends agree bit-for-bit.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
from numpy.typing import NDArray

BACKEND_NAME = "numpy"

SQRT2 = math.sqrt(2.0)
DIST2_INF = np.int64(2**62)

# 8-connected neighborhood: (drow, dcol, diagonal)
_NEIGHBORS = (
    (-1, -1, True),
    (-1, 0, False),
    (-1, 1, True),
    (0, -1, False),
    (0, 1, False),
    (1, -1, True),
    (1, 0, False),
    (1, 1, True),
)


def raycast_grid(
    ox: float,
    oy: float,
    cos_t: NDArray[np.float64],
    sin_t: NDArray[np.float64],
    occupied: NDArray[np.uint8],
    resolution: float,
    step: float,
    n_steps: int,
) -> NDArray[np.float64]:
    """March each beam in fixed steps; first occupied cell wins.

    Returns per-beam range, inf where nothing is hit within n_steps.
    """
    height, width = occupied.shape
    ts = step * np.arange(1, n_steps + 1, dtype=np.float64)
    px = ox + ts[None, :] * cos_t[:, None]
    py = oy + ts[None, :] * sin_t[:, None]
    cols = np.floor(px / resolution).astype(np.int64)
    rows = np.floor(py / resolution).astype(np.int64)
    inb = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    hit = np.zeros(inb.shape, dtype=bool)
    hit[inb] = occupied[rows[inb], cols[inb]] != 0
    any_hit = hit.any(axis=1)
    first = hit.argmax(axis=1)
    out = np.full(cos_t.shape[0], np.inf, dtype=np.float64)
    out[any_hit] = ts[first[any_hit]]
    return out


def _traverse_ray(ox, oy, ex, ey, resolution, height, width):
    """Amanatides-Woo cell walk from origin to endpoint, inclusive.

    Yields (row, col) pairs; the last yielded pair is the endpoint cell
    (or the walk stops early when the step budget is exhausted).
    """
    col = int(math.floor(ox / resolution))
    row = int(math.floor(oy / resolution))
    end_col = int(math.floor(ex / resolution))
    end_row = int(math.floor(ey / resolution))
    dx = ex - ox
    dy = ey - oy
    step_col = 1 if dx > 0.0 else -1
    step_row = 1 if dy > 0.0 else -1
    if dx != 0.0:
        t_delta_x = resolution / abs(dx)
        next_x = (col + 1) * resolution if dx > 0.0 else col * resolution
        t_max_x = (next_x - ox) / dx
    else:
        t_delta_x = math.inf
        t_max_x = math.inf
    if dy != 0.0:
        t_delta_y = resolution / abs(dy)
        next_y = (row + 1) * resolution if dy > 0.0 else row * resolution
        t_max_y = (next_y - oy) / dy
    else:
        t_delta_y = math.inf
        t_max_y = math.inf
    budget = abs(end_row - row) + abs(end_col - col) + 4
    for _ in range(budget):
        yield row, col
        if row == end_row and col == end_col:
            return
        if t_max_x <= t_max_y:
            col += step_col
            t_max_x += t_delta_x
        else:
            row += step_row
            t_max_y += t_delta_y
    yield end_row, end_col


def integrate_rays(
    log_odds: NDArray[np.float64],
    hits: NDArray[np.int64],
    misses: NDArray[np.int64],
    ox: float,
    oy: float,
    end_x: NDArray[np.float64],
    end_y: NDArray[np.float64],
    is_hit: NDArray[np.uint8],
    resolution: float,
    l_hit: float,
    l_miss: float,
    l_min: float,
    l_max: float,
) -> None:
    """Apply one scan's ray updates to a log-odds grid in place.

    Cells strictly before an endpoint take the miss update; the endpoint
    cell takes the hit update for hit beams and the miss update for
    max-range beams.
    """
    height, width = log_odds.shape
    for i in range(end_x.shape[0]):
        ex = end_x[i]
        ey = end_y[i]
        end_col = int(math.floor(ex / resolution))
        end_row = int(math.floor(ey / resolution))
        for row, col in _traverse_ray(ox, oy, ex, ey, resolution, height, width):
            if row < 0 or row >= height or col < 0 or col >= width:
                continue
            if row == end_row and col == end_col and is_hit[i] != 0:
                value = log_odds[row, col] + l_hit
                hits[row, col] += 1
            else:
                value = log_odds[row, col] + l_miss
                misses[row, col] += 1
            if value < l_min:
                value = l_min
            elif value > l_max:
                value = l_max
            log_odds[row, col] = value


def score_candidates(
    occupied: NDArray[np.uint8],
    local_x: NDArray[np.float64],
    local_y: NDArray[np.float64],
    cand_x: NDArray[np.float64],
    cand_y: NDArray[np.float64],
    cand_cos: NDArray[np.float64],
    cand_sin: NDArray[np.float64],
    resolution: float,
) -> NDArray[np.int64]:
    """Count scan endpoints landing in occupied cells per candidate pose."""
    height, width = occupied.shape
    ex = cand_x[:, None] + local_x[None, :] * cand_cos[:, None] - local_y[None, :] * cand_sin[:, None]
    ey = cand_y[:, None] + local_x[None, :] * cand_sin[:, None] + local_y[None, :] * cand_cos[:, None]
    cols = np.floor(ex / resolution).astype(np.int64)
    rows = np.floor(ey / resolution).astype(np.int64)
    inb = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    occ_hit = np.zeros(inb.shape, dtype=np.int64)
    occ_hit[inb] = occupied[rows[inb], cols[inb]].astype(np.int64)
    return occ_hit.sum(axis=1)


def min_dist2_grid(
    lethal: NDArray[np.uint8],
    kernel_dr: NDArray[np.int64],
    kernel_dc: NDArray[np.int64],
    kernel_d2: NDArray[np.int64],
) -> NDArray[np.int64]:
    """Squared cell distance to the nearest lethal cell, DIST2_INF beyond reach."""
    from scipy.ndimage import distance_transform_edt

    if not lethal.any():
        return np.full(lethal.shape, DIST2_INF, dtype=np.int64)
    dist = distance_transform_edt(lethal == 0)
    d2 = np.rint(dist * dist).astype(np.int64)
    limit = kernel_d2.max()
    d2[d2 > limit] = DIST2_INF
    return d2


def min_dist2_block(
    lethal: NDArray[np.uint8],
    r0: int,
    r1: int,
    c0: int,
    c1: int,
    kernel_dr: NDArray[np.int64],
    kernel_dc: NDArray[np.int64],
    kernel_d2: NDArray[np.int64],
) -> NDArray[np.int64]:
    """min_dist2_grid restricted to the half-open block [r0:r1, c0:c1].

    Lethal cells within kernel reach outside the block still contribute.
    """
    from scipy.ndimage import distance_transform_edt

    height, width = lethal.shape
    reach = int(math.isqrt(int(kernel_d2.max()))) + 1
    pr0 = max(0, r0 - reach)
    pr1 = min(height, r1 + reach)
    pc0 = max(0, c0 - reach)
    pc1 = min(width, c1 + reach)
    crop = lethal[pr0:pr1, pc0:pc1]
    if not crop.any():
        return np.full((r1 - r0, c1 - c0), DIST2_INF, dtype=np.int64)
    dist = distance_transform_edt(crop == 0)
    d2 = np.rint(dist * dist).astype(np.int64)
    limit = kernel_d2.max()
    d2[d2 > limit] = DIST2_INF
    return np.ascontiguousarray(d2[r0 - pr0 : r1 - pr0, c0 - pc0 : c1 - pc0])


def clear_ray_cells(
    dyn_lethal: NDArray[np.uint8],
    ox: float,
    oy: float,
    end_x: NDArray[np.float64],
    end_y: NDArray[np.float64],
    include_end: NDArray[np.uint8],
    resolution: float,
) -> int:
    """Zero dynamic-lethal cells crossed by each ray; returns cells flipped.

    Endpoint cells are skipped unless include_end marks the beam (used for
    max-range beams that observed free space the whole way out).
    """
    height, width = dyn_lethal.shape
    flipped = 0
    for i in range(end_x.shape[0]):
        ex = end_x[i]
        ey = end_y[i]
        end_col = int(math.floor(ex / resolution))
        end_row = int(math.floor(ey / resolution))
        for row, col in _traverse_ray(ox, oy, ex, ey, resolution, height, width):
            if row < 0 or row >= height or col < 0 or col >= width:
                continue
            if row == end_row and col == end_col and include_end[i] == 0:
                continue
            if dyn_lethal[row, col] != 0:
                dyn_lethal[row, col] = 0
                flipped += 1
    return flipped


def astar_grid(
    cost: NDArray[np.uint8],
    start_row: int,
    start_col: int,
    goal_row: int,
    goal_col: int,
    resolution: float,
    res_over_64: float,
    blocked_at: int,
):
    """8-connected A* over a cost grid.

    Edge weight is move length times (1 + cost/64); cells with cost at or
    above blocked_at are impassable. Accumulated cost is tracked as an
    integer pair (straight units, diagonal units) and the float key is
    recomputed from the pair each time, which makes tie handling and the
    returned total independent of expansion order.

    Returns (status, path_indices, g_straight, g_diag) with status 0 on
    success and 1 when no path exists. path_indices is row-major cell
    indices from start to goal.
    """
    height, width = cost.shape
    empty = np.empty(0, dtype=np.int64)
    if cost[goal_row, goal_col] >= blocked_at:
        return 1, empty, 0, 0
    start_idx = start_row * width + start_col
    goal_idx = goal_row * width + goal_col
    if start_idx == goal_idx:
        return 0, np.array([start_idx], dtype=np.int64), 0, 0

    g_f = np.full(height * width, np.inf, dtype=np.float64)
    g_a = np.zeros(height * width, dtype=np.int64)
    g_b = np.zeros(height * width, dtype=np.int64)
    parent = np.full(height * width, -1, dtype=np.int64)
    closed = np.zeros(height * width, dtype=bool)

    dr0 = start_row - goal_row
    dc0 = start_col - goal_col
    h0 = math.sqrt(float(dr0 * dr0 + dc0 * dc0)) * resolution
    g_f[start_idx] = 0.0
    heap = [(h0, h0, start_idx)]
    while heap:
        _, _, idx = heapq.heappop(heap)
        if closed[idx]:
            continue
        closed[idx] = True
        if idx == goal_idx:
            break
        row = idx // width
        col = idx % width
        for drow, dcol, diagonal in _NEIGHBORS:
            nrow = row + drow
            ncol = col + dcol
            if nrow < 0 or nrow >= height or ncol < 0 or ncol >= width:
                continue
            target_cost = cost[nrow, ncol]
            if target_cost >= blocked_at:
                continue
            nidx = nrow * width + ncol
            if closed[nidx]:
                continue
            weight = 64 + int(target_cost)
            if diagonal:
                na = g_a[idx]
                nb = g_b[idx] + weight
            else:
                na = g_a[idx] + weight
                nb = g_b[idx]
            new_g = (float(na) + float(nb) * SQRT2) * res_over_64
            if new_g < g_f[nidx]:
                g_f[nidx] = new_g
                g_a[nidx] = na
                g_b[nidx] = nb
                parent[nidx] = idx
                dr = nrow - goal_row
                dc = ncol - goal_col
                h = math.sqrt(float(dr * dr + dc * dc)) * resolution
                heapq.heappush(heap, (new_g + h, h, nidx))
    if not closed[goal_idx]:
        return 1, empty, 0, 0
    chain = []
    idx = goal_idx
    while idx != -1:
        chain.append(idx)
        idx = parent[idx]
    chain.reverse()
    return 0, np.array(chain, dtype=np.int64), int(g_a[goal_idx]), int(g_b[goal_idx])
