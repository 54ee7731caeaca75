"""Layered costmap: inflated static map plus a dynamic obstacle layer.

Cost semantics follow the usual lattice convention: 254 lethal (cell
itself occupied), 253 inscribed (center here guarantees contact), then an
exponential falloff to 0 outside the inflation radius. 255 marks unknown
cells, which planning treats as inscribed.

Inflation works on integer squared cell distances looked up in a
precomputed table, so the JIT and numpy backends produce identical bytes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from wheelnav import kernels
from wheelnav.mapping import OCCUPIED_VALUE, UNKNOWN_VALUE, OccupancyGrid
from wheelnav.sim import DepthScan
from wheelnav.types import Pose2D

LETHAL = 254
INSCRIBED = 253
UNKNOWN = 255

# dynamic obstacles are only marked when seen closer than this
MARK_RANGE = 2.5  # m

COSTMAP_MAGIC = b"WNAVCST1"


@dataclass(frozen=True)
class InflationParams:
    """Footprint and falloff for a 0.7 m wide chair."""

    chair_width: float = 0.7  # m
    inscribed_radius: float = 0.35  # m
    inflation_radius: float = 0.84  # m, 1.2 x chair width
    decay_rate: float = 3.0  # 1/m

    def __post_init__(self) -> None:
        if self.inflation_radius <= self.chair_width:
            raise ValueError("inflation radius must exceed the chair width")
        if abs(self.inflation_radius - 1.2 * self.chair_width) > 1e-9:
            raise ValueError("inflation radius must be 1.2 x chair width")
        if self.inscribed_radius * 2.0 > self.chair_width + 1e-9:
            raise ValueError("inscribed diameter cannot exceed the chair width")


def cost_of_distance(d: float, params: InflationParams) -> int:
    """Inflation cost for a free cell at distance d from the nearest wall."""
    if d <= params.inscribed_radius:
        return INSCRIBED
    if d <= params.inflation_radius:
        return int(round(252.0 * math.exp(-params.decay_rate * (d - params.inscribed_radius))))
    return 0


@lru_cache(maxsize=8)
def _inflation_tables(
    params: InflationParams, resolution: float
) -> tuple[
    NDArray[np.uint8], NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]
]:
    """LUT from squared cell distance to cost, plus the offset kernel.

    The kernel holds every cell offset whose squared distance fits the
    table; the last table entry is the catch-all zero for anything
    farther, which the callers reach by clamping the index.
    """
    cells = params.inflation_radius / resolution
    d2_max = int(math.floor(cells * cells))
    lut = np.zeros(d2_max + 2, dtype=np.uint8)
    for d2 in range(d2_max + 2):
        lut[d2] = cost_of_distance(math.sqrt(float(d2)) * resolution, params)
    if lut[-1] != 0:
        raise AssertionError("inflation table must end at zero cost")
    reach = int(math.isqrt(d2_max))
    offs = [
        (dr, dc)
        for dr in range(-reach, reach + 1)
        for dc in range(-reach, reach + 1)
        if dr * dr + dc * dc <= d2_max
    ]
    kdr = np.array([o[0] for o in offs], dtype=np.int64)
    kdc = np.array([o[1] for o in offs], dtype=np.int64)
    kd2 = np.array([o[0] ** 2 + o[1] ** 2 for o in offs], dtype=np.int64)
    for arr in (lut, kdr, kdc, kd2):
        arr.setflags(write=False)
    return lut, kdr, kdc, kd2


@dataclass
class Costmap:
    """Static and dynamic layers over one grid; composed on demand."""

    resolution: float
    params: InflationParams
    static_cost: NDArray[np.uint8]
    dyn_cost: NDArray[np.uint8]
    dyn_lethal: NDArray[np.uint8]

    @property
    def width(self) -> int:
        return self.static_cost.shape[1]

    @property
    def height(self) -> int:
        return self.static_cost.shape[0]

    def composed(self) -> NDArray[np.uint8]:
        return np.maximum(self.static_cost, self.dyn_cost)

    def tables(self):
        return _inflation_tables(self.params, self.resolution)


def build_static_costmap(
    grid: OccupancyGrid, params: InflationParams | None = None
) -> Costmap:
    """Inflate a finalized occupancy grid into the static layer."""
    params = params or InflationParams()
    lut, kdr, kdc, kd2 = _inflation_tables(params, grid.resolution)
    lethal = (grid.cells == OCCUPIED_VALUE).astype(np.uint8)
    d2 = kernels.min_dist2_grid(lethal, kdr, kdc, kd2)
    idx = np.minimum(d2, len(lut) - 1)
    static = lut[idx]
    static[lethal == 1] = LETHAL
    static[grid.cells == UNKNOWN_VALUE] = UNKNOWN
    shape = grid.cells.shape
    return Costmap(
        resolution=grid.resolution,
        params=params,
        static_cost=static,
        dyn_cost=np.zeros(shape, dtype=np.uint8),
        dyn_lethal=np.zeros(shape, dtype=np.uint8),
    )


def cost_at(cm: Costmap, x: float, y: float) -> int:
    """Composed cost at a world point; unknown reads as inscribed."""
    col = int(math.floor(x / cm.resolution))
    row = int(math.floor(y / cm.resolution))
    if not (0 <= row < cm.height and 0 <= col < cm.width):
        raise ValueError(f"query ({x:.3f}, {y:.3f}) outside the costmap")
    value = max(int(cm.static_cost[row, col]), int(cm.dyn_cost[row, col]))
    if value == UNKNOWN:
        return INSCRIBED
    return value


def obstacle_points(pose: Pose2D, scan: DepthScan) -> NDArray[np.float64]:
    """World endpoints of the hit beams, shape (n, 2)."""
    hit = scan.hit_mask
    angles = pose.theta + scan.bearings[hit]
    r = scan.ranges[hit]
    return np.stack([pose.x + r * np.cos(angles), pose.y + r * np.sin(angles)], axis=1)


def _reinflate_block(cm: Costmap, r0: int, r1: int, c0: int, c1: int) -> None:
    lut, kdr, kdc, kd2 = cm.tables()
    d2 = kernels.min_dist2_block(cm.dyn_lethal, r0, r1, c0, c1, kdr, kdc, kd2)
    idx = np.minimum(d2, len(lut) - 1)
    block = lut[idx]
    lethal_block = cm.dyn_lethal[r0:r1, c0:c1] == 1
    block[lethal_block] = LETHAL
    cm.dyn_cost[r0:r1, c0:c1] = block


def _reinflate_all(cm: Costmap) -> None:
    lut, kdr, kdc, kd2 = cm.tables()
    if not cm.dyn_lethal.any():
        cm.dyn_cost[:] = 0
        return
    d2 = kernels.min_dist2_grid(cm.dyn_lethal, kdr, kdc, kd2)
    idx = np.minimum(d2, len(lut) - 1)
    cm.dyn_cost[:] = lut[idx]
    cm.dyn_cost[cm.dyn_lethal == 1] = LETHAL


def mark_and_clear(cm: Costmap, pose: Pose2D, scan: DepthScan) -> int:
    """Update the dynamic layer from one scan; returns cells changed.

    Close hits not explained by the static map are marked lethal; cells a
    beam passed through are cleared. The dynamic inflation is then redone
    around the sensed region, which bounds every cell the scan can touch.
    """
    res = cm.resolution
    angles = pose.theta + scan.bearings
    hit = scan.hit_mask
    r_eff = np.where(hit, scan.ranges, scan.max_range)
    end_x = pose.x + r_eff * np.cos(angles)
    end_y = pose.y + r_eff * np.sin(angles)
    include_end = (~hit).astype(np.uint8)
    changed = kernels.clear_ray_cells(
        cm.dyn_lethal, pose.x, pose.y, end_x, end_y, include_end, res
    )
    near = hit & (scan.ranges <= MARK_RANGE)
    cols = np.floor(end_x[near] / res).astype(np.int64)
    rows = np.floor(end_y[near] / res).astype(np.int64)
    inb = (rows >= 0) & (rows < cm.height) & (cols >= 0) & (cols < cm.width)
    for row, col in zip(rows[inb], cols[inb]):
        if cm.static_cost[row, col] == LETHAL:
            continue
        if cm.dyn_lethal[row, col] == 0:
            cm.dyn_lethal[row, col] = 1
            changed += 1
    if changed:
        reach = scan.max_range + cm.params.inflation_radius + 2.0 * res
        r0 = max(0, int(math.floor((pose.y - reach) / res)))
        r1 = min(cm.height, int(math.floor((pose.y + reach) / res)) + 1)
        c0 = max(0, int(math.floor((pose.x - reach) / res)))
        c1 = min(cm.width, int(math.floor((pose.x + reach) / res)) + 1)
        _reinflate_block(cm, r0, r1, c0, c1)
    return changed


def clear_dynamic_beyond(cm: Costmap, pose: Pose2D, radius: float) -> int:
    """Drop remembered dynamic obstacles farther than radius from the pose."""
    rows, cols = np.nonzero(cm.dyn_lethal)
    if rows.shape[0] == 0:
        return 0
    cy = (rows + 0.5) * cm.resolution
    cx = (cols + 0.5) * cm.resolution
    far = (cx - pose.x) ** 2 + (cy - pose.y) ** 2 > radius * radius
    if not far.any():
        return 0
    cm.dyn_lethal[rows[far], cols[far]] = 0
    _reinflate_all(cm)
    return int(far.sum())


def encode_costmap(cm: Costmap) -> bytes:
    """Binary snapshot of the composed grid, same header layout as maps."""
    header = COSTMAP_MAGIC + struct.pack("<dII", cm.resolution, cm.width, cm.height)
    return header + cm.composed().tobytes()
