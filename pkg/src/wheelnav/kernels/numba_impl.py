"""JIT-compiled backend.

Scalar twins of the functions in ``numpy_impl``. Expression grouping and
the division-by-resolution cell lookup are kept identical so both
backends produce bit-identical results; tests assert that equivalence.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

BACKEND_NAME = "numba"

SQRT2 = math.sqrt(2.0)
DIST2_INF = 2**62

_DR8 = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_DC8 = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)


@njit(cache=True)
def raycast_grid(ox, oy, cos_t, sin_t, occupied, resolution, step, n_steps):
    n_beams = cos_t.shape[0]
    height, width = occupied.shape
    out = np.full(n_beams, np.inf, dtype=np.float64)
    for i in range(n_beams):
        c = cos_t[i]
        s = sin_t[i]
        for k in range(1, n_steps + 1):
            t = step * k
            px = ox + t * c
            py = oy + t * s
            col = int(math.floor(px / resolution))
            row = int(math.floor(py / resolution))
            if row < 0 or row >= height or col < 0 or col >= width:
                continue
            if occupied[row, col] != 0:
                out[i] = t
                break
    return out


@njit(cache=True)
def integrate_rays(
    log_odds,
    hits,
    misses,
    ox,
    oy,
    end_x,
    end_y,
    is_hit,
    resolution,
    l_hit,
    l_miss,
    l_min,
    l_max,
):
    height, width = log_odds.shape
    for i in range(end_x.shape[0]):
        ex = end_x[i]
        ey = end_y[i]
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
            if dx > 0.0:
                next_x = (col + 1) * resolution
            else:
                next_x = col * resolution
            t_max_x = (next_x - ox) / dx
        else:
            t_delta_x = np.inf
            t_max_x = np.inf
        if dy != 0.0:
            t_delta_y = resolution / abs(dy)
            if dy > 0.0:
                next_y = (row + 1) * resolution
            else:
                next_y = row * resolution
            t_max_y = (next_y - oy) / dy
        else:
            t_delta_y = np.inf
            t_max_y = np.inf
        budget = abs(end_row - row) + abs(end_col - col) + 4
        reached = False
        for _ in range(budget):
            if 0 <= row < height and 0 <= col < width:
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
            if row == end_row and col == end_col:
                reached = True
                break
            if t_max_x <= t_max_y:
                col += step_col
                t_max_x += t_delta_x
            else:
                row += step_row
                t_max_y += t_delta_y
        if not reached:
            if 0 <= end_row < height and 0 <= end_col < width:
                if is_hit[i] != 0:
                    value = log_odds[end_row, end_col] + l_hit
                    hits[end_row, end_col] += 1
                else:
                    value = log_odds[end_row, end_col] + l_miss
                    misses[end_row, end_col] += 1
                if value < l_min:
                    value = l_min
                elif value > l_max:
                    value = l_max
                log_odds[end_row, end_col] = value


@njit(cache=True)
def score_candidates(occupied, local_x, local_y, cand_x, cand_y, cand_cos, cand_sin, resolution):
    height, width = occupied.shape
    n_cand = cand_x.shape[0]
    n_beams = local_x.shape[0]
    scores = np.zeros(n_cand, dtype=np.int64)
    for i in range(n_cand):
        cx = cand_x[i]
        cy = cand_y[i]
        cc = cand_cos[i]
        cs = cand_sin[i]
        total = 0
        for j in range(n_beams):
            ex = cx + local_x[j] * cc - local_y[j] * cs
            ey = cy + local_x[j] * cs + local_y[j] * cc
            col = int(math.floor(ex / resolution))
            row = int(math.floor(ey / resolution))
            if row < 0 or row >= height or col < 0 or col >= width:
                continue
            if occupied[row, col] != 0:
                total += 1
        scores[i] = total
    return scores


@njit(cache=True)
def min_dist2_grid(lethal, kernel_dr, kernel_dc, kernel_d2):
    height, width = lethal.shape
    out = np.full((height, width), DIST2_INF, dtype=np.int64)
    n_off = kernel_dr.shape[0]
    for r in range(height):
        for c in range(width):
            if lethal[r, c] != 0:
                for k in range(n_off):
                    rr = r + kernel_dr[k]
                    cc = c + kernel_dc[k]
                    if 0 <= rr < height and 0 <= cc < width:
                        if kernel_d2[k] < out[rr, cc]:
                            out[rr, cc] = kernel_d2[k]
    return out


@njit(cache=True)
def min_dist2_block(lethal, r0, r1, c0, c1, kernel_dr, kernel_dc, kernel_d2):
    height, width = lethal.shape
    out = np.full((r1 - r0, c1 - c0), DIST2_INF, dtype=np.int64)
    reach = int(math.sqrt(float(kernel_d2.max()))) + 1
    pr0 = max(0, r0 - reach)
    pr1 = min(height, r1 + reach)
    pc0 = max(0, c0 - reach)
    pc1 = min(width, c1 + reach)
    n_off = kernel_dr.shape[0]
    for r in range(pr0, pr1):
        for c in range(pc0, pc1):
            if lethal[r, c] != 0:
                for k in range(n_off):
                    rr = r + kernel_dr[k]
                    cc = c + kernel_dc[k]
                    if r0 <= rr < r1 and c0 <= cc < c1:
                        if kernel_d2[k] < out[rr - r0, cc - c0]:
                            out[rr - r0, cc - c0] = kernel_d2[k]
    return out


@njit(cache=True)
def clear_ray_cells(dyn_lethal, ox, oy, end_x, end_y, include_end, resolution):
    height, width = dyn_lethal.shape
    flipped = 0
    for i in range(end_x.shape[0]):
        ex = end_x[i]
        ey = end_y[i]
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
            if dx > 0.0:
                next_x = (col + 1) * resolution
            else:
                next_x = col * resolution
            t_max_x = (next_x - ox) / dx
        else:
            t_delta_x = np.inf
            t_max_x = np.inf
        if dy != 0.0:
            t_delta_y = resolution / abs(dy)
            if dy > 0.0:
                next_y = (row + 1) * resolution
            else:
                next_y = row * resolution
            t_max_y = (next_y - oy) / dy
        else:
            t_delta_y = np.inf
            t_max_y = np.inf
        budget = abs(end_row - row) + abs(end_col - col) + 4
        for _ in range(budget):
            if 0 <= row < height and 0 <= col < width:
                at_end = row == end_row and col == end_col
                if not (at_end and include_end[i] == 0):
                    if dyn_lethal[row, col] != 0:
                        dyn_lethal[row, col] = 0
                        flipped += 1
            if row == end_row and col == end_col:
                break
            if t_max_x <= t_max_y:
                col += step_col
                t_max_x += t_delta_x
            else:
                row += step_row
                t_max_y += t_delta_y
    return flipped


@njit(cache=True)
def astar_grid(cost, start_row, start_col, goal_row, goal_col, resolution, res_over_64, blocked_at):
    height, width = cost.shape
    empty = np.empty(0, dtype=np.int64)
    if cost[goal_row, goal_col] >= blocked_at:
        return 1, empty, 0, 0
    start_idx = start_row * width + start_col
    goal_idx = goal_row * width + goal_col
    if start_idx == goal_idx:
        out = np.empty(1, dtype=np.int64)
        out[0] = start_idx
        return 0, out, 0, 0

    n = height * width
    g_f = np.full(n, np.inf, dtype=np.float64)
    g_a = np.zeros(n, dtype=np.int64)
    g_b = np.zeros(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.uint8)

    cap = 1024
    heap_f = np.empty(cap, dtype=np.float64)
    heap_h = np.empty(cap, dtype=np.float64)
    heap_i = np.empty(cap, dtype=np.int64)
    hs = 0

    dr0 = start_row - goal_row
    dc0 = start_col - goal_col
    h0 = math.sqrt(float(dr0 * dr0 + dc0 * dc0)) * resolution
    g_f[start_idx] = 0.0
    heap_f[0] = h0
    heap_h[0] = h0
    heap_i[0] = start_idx
    hs = 1

    while hs > 0:
        idx = heap_i[0]
        hs -= 1
        heap_f[0] = heap_f[hs]
        heap_h[0] = heap_h[hs]
        heap_i[0] = heap_i[hs]
        j = 0
        while True:
            left = 2 * j + 1
            right = left + 1
            smallest = j
            if left < hs:
                lf = heap_f[left]
                lh = heap_h[left]
                li = heap_i[left]
                sf = heap_f[smallest]
                sh = heap_h[smallest]
                si = heap_i[smallest]
                if lf < sf or (lf == sf and (lh < sh or (lh == sh and li < si))):
                    smallest = left
            if right < hs:
                rf = heap_f[right]
                rh = heap_h[right]
                ri = heap_i[right]
                sf = heap_f[smallest]
                sh = heap_h[smallest]
                si = heap_i[smallest]
                if rf < sf or (rf == sf and (rh < sh or (rh == sh and ri < si))):
                    smallest = right
            if smallest == j:
                break
            heap_f[j], heap_f[smallest] = heap_f[smallest], heap_f[j]
            heap_h[j], heap_h[smallest] = heap_h[smallest], heap_h[j]
            heap_i[j], heap_i[smallest] = heap_i[smallest], heap_i[j]
            j = smallest

        if closed[idx] != 0:
            continue
        closed[idx] = 1
        if idx == goal_idx:
            break
        row = idx // width
        col = idx % width
        for k in range(8):
            nrow = row + _DR8[k]
            ncol = col + _DC8[k]
            if nrow < 0 or nrow >= height or ncol < 0 or ncol >= width:
                continue
            target_cost = cost[nrow, ncol]
            if target_cost >= blocked_at:
                continue
            nidx = nrow * width + ncol
            if closed[nidx] != 0:
                continue
            weight = 64 + int(target_cost)
            if _DR8[k] != 0 and _DC8[k] != 0:
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
                if hs >= cap:
                    new_cap = cap * 2
                    nf = np.empty(new_cap, dtype=np.float64)
                    nh = np.empty(new_cap, dtype=np.float64)
                    ni = np.empty(new_cap, dtype=np.int64)
                    nf[:cap] = heap_f
                    nh[:cap] = heap_h
                    ni[:cap] = heap_i
                    heap_f = nf
                    heap_h = nh
                    heap_i = ni
                    cap = new_cap
                pos = hs
                heap_f[pos] = new_g + h
                heap_h[pos] = h
                heap_i[pos] = nidx
                hs += 1
                while pos > 0:
                    par = (pos - 1) // 2
                    pf = heap_f[par]
                    ph = heap_h[par]
                    pi = heap_i[par]
                    cf = heap_f[pos]
                    ch = heap_h[pos]
                    ci = heap_i[pos]
                    if cf < pf or (cf == pf and (ch < ph or (ch == ph and ci < pi))):
                        heap_f[par], heap_f[pos] = cf, pf
                        heap_h[par], heap_h[pos] = ch, ph
                        heap_i[par], heap_i[pos] = ci, pi
                        pos = par
                    else:
                        break

    if closed[goal_idx] == 0:
        return 1, empty, 0, 0
    buf = np.empty(n, dtype=np.int64)
    count = 0
    idx = goal_idx
    while idx != -1:
        buf[count] = idx
        count += 1
        idx = parent[idx]
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = buf[count - 1 - i]
    return 0, out, int(g_a[goal_idx]), int(g_b[goal_idx])
