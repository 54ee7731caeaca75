"""Timing harness comparing the numba and numpy kernel backends.

Each workload mirrors the shapes the navigation stack feeds the kernel
at runtime (hospital-sized grids, 64-beam scans, the full matcher
candidate lattice). Outputs agree between backends before timing is
reported, so the table never hides a divergence behind a speedup.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from wheelnav.costmap import InflationParams, _inflation_tables
from wheelnav.kernels import load_backend
from wheelnav.mapping import MapBelief, _search_offsets
from wheelnav.planner import INSCRIBED
from wheelnav.sim import RAY_STEP_FRACTION
from wheelnav.world import bundled_world, rasterize

FOV = 1.518
BEAMS = 64
MAX_RANGE = 3.0


@dataclass(frozen=True)
class BenchRow:
    kernel: str
    numpy_ms: float
    numba_ms: float | None

    @property
    def speedup(self) -> float | None:
        if self.numba_ms is None or self.numba_ms == 0.0:
            return None
        return self.numpy_ms / self.numba_ms


def _median_ms(fn, repeats: int) -> float:
    fn()  # warmup; lets a JIT backend compile outside the timed region
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    samples.sort()
    return samples[len(samples) // 2]


def _workloads():
    spec = bundled_world("hospital")
    grid = rasterize(spec)
    occ = grid.occupied.view(np.uint8)
    res = grid.resolution
    h, w = occ.shape

    bearings = np.linspace(-FOV / 2.0, FOV / 2.0, BEAMS)
    px, py, pt = 2.0, 2.5, 0.9
    cos_t = np.cos(pt + bearings)
    sin_t = np.sin(pt + bearings)
    step = res * RAY_STEP_FRACTION
    n_steps = int(round(MAX_RANGE / step))

    def make_scan(k):
        ranges = k.raycast_grid(px, py, cos_t, sin_t, occ, res, step, n_steps)
        hit = np.isfinite(ranges)
        r_eff = np.where(hit, ranges, MAX_RANGE)
        end_x = px + r_eff * cos_t
        end_y = py + r_eff * sin_t
        return end_x, end_y, hit

    params = InflationParams()
    lut, kdr, kdc, kd2 = _inflation_tables(params, res)

    rng = np.random.default_rng(7)
    dyn_marks = np.zeros_like(occ)
    rows = rng.integers(0, h, 400)
    cols = rng.integers(0, w, 400)
    dyn_marks[rows, cols] = 1

    dx, dy, dth = _search_offsets(res, 0.2, 0.1, 0.025)

    def bench_raycast(k):
        def run():
            k.raycast_grid(px, py, cos_t, sin_t, occ, res, step, n_steps)

        return run, lambda: k.raycast_grid(px, py, cos_t, sin_t, occ, res, step, n_steps)

    def bench_integrate(k):
        end_x, end_y, hit = make_scan(k)
        is_hit = hit.astype(np.uint8)
        belief = MapBelief.empty(res, w, h)

        def run():
            k.integrate_rays(
                belief.log_odds, belief.hits, belief.misses,
                px, py, end_x, end_y, is_hit, res, 0.85, -0.4, -5.0, 5.0,
            )

        def result():
            fresh = MapBelief.empty(res, w, h)
            k.integrate_rays(
                fresh.log_odds, fresh.hits, fresh.misses,
                px, py, end_x, end_y, is_hit, res, 0.85, -0.4, -5.0, 5.0,
            )
            return fresh.log_odds

        return run, result

    def bench_score(k):
        end_x, end_y, hit = make_scan(k)
        local_x = (end_x[hit] - px) * math.cos(-pt) - (end_y[hit] - py) * math.sin(-pt)
        local_y = (end_x[hit] - px) * math.sin(-pt) + (end_y[hit] - py) * math.cos(-pt)
        cand_x = px + dx
        cand_y = py + dy
        cand_cos = np.cos(pt + dth)
        cand_sin = np.sin(pt + dth)

        def run():
            k.score_candidates(
                occ, local_x, local_y, cand_x, cand_y, cand_cos, cand_sin, res
            )

        return run, lambda: k.score_candidates(
            occ, local_x, local_y, cand_x, cand_y, cand_cos, cand_sin, res
        )

    def bench_dist_grid(k):
        def run():
            k.min_dist2_grid(occ, kdr, kdc, kd2)

        return run, lambda: k.min_dist2_grid(occ, kdr, kdc, kd2)

    def bench_dist_block(k):
        def run():
            k.min_dist2_block(dyn_marks, 40, 104, 60, 124, kdr, kdc, kd2)

        return run, lambda: k.min_dist2_block(dyn_marks, 40, 104, 60, 124, kdr, kdc, kd2)

    def bench_clear(k):
        end_x, end_y, hit = make_scan(k)
        include = (~hit).astype(np.uint8)

        def run():
            k.clear_ray_cells(dyn_marks.copy(), px, py, end_x, end_y, include, res)

        def result():
            marks = dyn_marks.copy()
            k.clear_ray_cells(marks, px, py, end_x, end_y, include, res)
            return marks

        return run, result

    def bench_astar(k):
        lethal = occ
        d2 = load_backend("numpy").min_dist2_grid(lethal, kdr, kdc, kd2)
        cost = lut[np.minimum(d2, len(lut) - 1)]
        cost[lethal == 1] = 254
        sr, sc = int(2.5 / res), int(2.0 / res)
        gr, gc = int(10.8 / res), int(17.0 / res)

        def run():
            k.astar_grid(cost, sr, sc, gr, gc, res, res / 64.0, INSCRIBED)

        def result():
            status, idxs, g_a, g_b = k.astar_grid(
                cost, sr, sc, gr, gc, res, res / 64.0, INSCRIBED
            )
            return status, idxs, g_a, g_b

        return run, result

    return [
        ("raycast_grid", bench_raycast),
        ("integrate_rays", bench_integrate),
        ("score_candidates", bench_score),
        ("min_dist2_grid", bench_dist_grid),
        ("min_dist2_block", bench_dist_block),
        ("clear_ray_cells", bench_clear),
        ("astar_grid", bench_astar),
    ]


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a = np.asarray(a)
    b = np.asarray(b)
    if a.dtype.kind == "f" or b.dtype.kind == "f":
        return bool(np.allclose(a, b, rtol=0.0, atol=1e-12, equal_nan=True))
    return bool(np.array_equal(a, b))


def run_bench(repeats: int = 5) -> list[BenchRow]:
    np_backend = load_backend("numpy")
    try:
        nb_backend = load_backend("numba")
    except ImportError:
        nb_backend = None

    rows: list[BenchRow] = []
    for name, factory in _workloads():
        np_run, np_result = factory(np_backend)
        numpy_ms = _median_ms(np_run, repeats)
        numba_ms = None
        if nb_backend is not None:
            nb_run, nb_result = factory(nb_backend)
            if not _same(np_result(), nb_result()):
                raise AssertionError(f"backend mismatch in {name}")
            numba_ms = _median_ms(nb_run, repeats)
        rows.append(BenchRow(name, numpy_ms, numba_ms))
    return rows


def render_table(rows: list[BenchRow]) -> str:
    lines = [f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}"]
    for r in rows:
        numba = f"{r.numba_ms:10.3f}" if r.numba_ms is not None else f"{'n/a':>10}"
        speed = f"{r.speedup:7.1f}x" if r.speedup is not None else f"{'n/a':>8}"
        lines.append(f"{r.kernel:<18} {r.numpy_ms:10.3f} {numba} {speed}")
    return "\n".join(lines)


def main(repeats: int = 5) -> None:
    print(render_table(run_bench(repeats)))
