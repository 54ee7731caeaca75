"""Occupancy mapping, scan-match localization and loop closure.

Mapping keeps a per-cell log-odds belief updated ray by ray. Localization
is an exhaustive correlative search around an odometry prior: candidate
poses are scored by how many scan endpoints land in occupied cells, and
the first strict maximum in a fixed candidate order wins, which keeps the
result deterministic. Loop closure corrects a drifted trajectory by
scan-matching the end of the run against a map built from its start, then
spreading the correction linearly over the logged poses and rebuilding.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from wheelnav import kernels
from wheelnav.sim import DepthScan
from wheelnav.types import Pose2D, wrap_angle

L_HIT = 0.85
L_MISS = -0.4
L_MIN = -5.0
L_MAX = 5.0

FREE_VALUE = 0
OCCUPIED_VALUE = 100
UNKNOWN_VALUE = 255

# localization search window and acceptance
SEARCH_WINDOW_POS = 0.2  # m each side of the prior
SEARCH_WINDOW_ANGLE = 0.1  # rad each side
ANGLE_STEP = 0.025  # rad
# Endpoint count below which the matcher keeps the odometry prior. Scans
# that graze a lone edge can clear a low bar and still leave the argmax
# free to wander the whole search window, dragging the estimate away far
# faster than dead reckoning drifts; a higher bar hands those stretches
# to the odometry fallback, which is locally accurate.
MIN_MATCH_SCORE = 16

# loop closure
LOOP_WINDOW_POS = 1.0  # m, wider search against the start-region map
LOOP_WINDOW_ANGLE = 0.5  # rad
LOOP_MATCH_SCORE = 16
REVISIT_DISTANCE = 1.0  # m, odometric distance back to the start
MIN_LOOP_TRAVEL = 2.0  # m, must leave before a return counts
START_REGION_SCANS = 10

CONF_TRACKING = "tracking"
CONF_LOW_FEATURES = "low_features"
CONF_LOST = "lost"

MAP_MAGIC = b"WNAVMAP1"


@dataclass
class MapBelief:
    """Log-odds occupancy belief with per-cell observation counters."""

    resolution: float
    log_odds: NDArray[np.float64]
    hits: NDArray[np.int64]
    misses: NDArray[np.int64]

    @classmethod
    def empty(cls, resolution: float, width: int, height: int) -> "MapBelief":
        return cls(
            resolution=resolution,
            log_odds=np.zeros((height, width), dtype=np.float64),
            hits=np.zeros((height, width), dtype=np.int64),
            misses=np.zeros((height, width), dtype=np.int64),
        )

    @property
    def width(self) -> int:
        return self.log_odds.shape[1]

    @property
    def height(self) -> int:
        return self.log_odds.shape[0]

    def occupied_cells(self) -> NDArray[np.uint8]:
        return (self.log_odds > 0.0).astype(np.uint8)


@dataclass(frozen=True)
class PoseEstimate:
    pose: Pose2D
    confidence: str
    score: int = 0


@dataclass(frozen=True)
class OccupancyGrid:
    """Finalized tri-state map: 0 free, 100 occupied, 255 unknown."""

    resolution: float
    cells: NDArray[np.uint8]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def occupied_u8(self) -> NDArray[np.uint8]:
        return (self.cells == OCCUPIED_VALUE).astype(np.uint8)


def _scan_endpoints(
    pose: Pose2D, scan: DepthScan
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.uint8]]:
    angles = pose.theta + scan.bearings
    hit = scan.hit_mask
    r_eff = np.where(hit, scan.ranges, scan.max_range)
    end_x = pose.x + r_eff * np.cos(angles)
    end_y = pose.y + r_eff * np.sin(angles)
    return end_x, end_y, hit.astype(np.uint8)


def integrate_scan(belief: MapBelief, pose: Pose2D, scan: DepthScan) -> MapBelief:
    """Fold one scan into the belief at the given pose, in place.

    Hit beams raise the endpoint cell and lower every cell crossed on the
    way; max-range beams lower the full ray.
    """
    end_x, end_y, is_hit = _scan_endpoints(pose, scan)
    kernels.integrate_rays(
        belief.log_odds,
        belief.hits,
        belief.misses,
        pose.x,
        pose.y,
        end_x,
        end_y,
        is_hit,
        belief.resolution,
        L_HIT,
        L_MISS,
        L_MIN,
        L_MAX,
    )
    return belief


@lru_cache(maxsize=8)
def _search_offsets(
    resolution: float, window_pos: float, window_angle: float, angle_step: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Candidate (dx, dy, dtheta) offsets in canonical order.

    Ordered by (dtheta^2, dx^2 + dy^2, dtheta, dx, dy) so the zero offset
    comes first and the first strict maximum prefers the smallest motion.
    """
    n_pos = int(round(window_pos / resolution))
    n_ang = int(round(window_angle / angle_step))
    cands = []
    for ai in range(-n_ang, n_ang + 1):
        dth = ai * angle_step
        for yi in range(-n_pos, n_pos + 1):
            dy = yi * resolution
            for xi in range(-n_pos, n_pos + 1):
                dx = xi * resolution
                cands.append((dth * dth, dx * dx + dy * dy, dth, dx, dy))
    cands.sort()
    arr = np.asarray(cands, dtype=np.float64)
    return arr[:, 3].copy(), arr[:, 4].copy(), arr[:, 2].copy()


def match_scan(
    occupied: NDArray[np.uint8],
    resolution: float,
    prior: Pose2D,
    scan: DepthScan,
    *,
    window_pos: float = SEARCH_WINDOW_POS,
    window_angle: float = SEARCH_WINDOW_ANGLE,
    angle_step: float = ANGLE_STEP,
) -> tuple[Pose2D, int]:
    """Best candidate pose around the prior and its endpoint-hit score."""
    hit = scan.hit_mask
    local_x = scan.ranges[hit] * np.cos(scan.bearings[hit])
    local_y = scan.ranges[hit] * np.sin(scan.bearings[hit])
    if local_x.shape[0] == 0:
        return prior, 0
    dx, dy, dth = _search_offsets(resolution, window_pos, window_angle, angle_step)
    cand_x = prior.x + dx
    cand_y = prior.y + dy
    cand_t = prior.theta + dth
    scores = kernels.score_candidates(
        occupied,
        local_x,
        local_y,
        cand_x,
        cand_y,
        np.cos(cand_t),
        np.sin(cand_t),
        resolution,
    )
    best = int(np.argmax(scores))
    pose = Pose2D(float(cand_x[best]), float(cand_y[best]), wrap_angle(float(cand_t[best])))
    return pose, int(scores[best])


def localize(
    occupied: NDArray[np.uint8],
    resolution: float,
    prior: Pose2D,
    scan: DepthScan,
) -> PoseEstimate:
    """Refine an odometry prior against the map.

    Degrades gracefully: too few endpoint matches keep the prior with
    low_features confidence, and a prior outside the map reports lost.
    """
    height, width = occupied.shape
    if not (0.0 <= prior.x < width * resolution and 0.0 <= prior.y < height * resolution):
        return PoseEstimate(prior, CONF_LOST)
    pose, score = match_scan(occupied, resolution, prior, scan)
    if score < MIN_MATCH_SCORE:
        return PoseEstimate(prior, CONF_LOW_FEATURES, score)
    return PoseEstimate(pose, CONF_TRACKING, score)


@dataclass(frozen=True)
class ScanLogEntry:
    tick: int
    odom_pose: Pose2D
    scan: DepthScan


@dataclass(frozen=True)
class LoopClosure:
    delta: tuple[float, float, float]
    score: int
    corrected_end: Pose2D


class MappingSession:
    """Accumulates scans at odometry poses and can close the loop at the end.

    The belief is rebuilt from the raw scan log after a closure, so the
    corrected map carries no residue of the drifted integration.
    """

    def __init__(self, resolution: float, width: int, height: int) -> None:
        self.belief = MapBelief.empty(resolution, width, height)
        self.entries: list[ScanLogEntry] = []
        self.corrected: list[Pose2D] | None = None
        self.travel = 0.0
        self.closure: LoopClosure | None = None

    def add_scan(self, tick: int, odom_pose: Pose2D, scan: DepthScan) -> None:
        if self.entries:
            self.travel += self.entries[-1].odom_pose.distance_to(odom_pose)
        self.entries.append(ScanLogEntry(tick, odom_pose, scan))
        integrate_scan(self.belief, odom_pose, scan)

    def revisit_detected(self) -> bool:
        """Odometry says the chair is back where mapping began."""
        if len(self.entries) < 2 or self.travel < MIN_LOOP_TRAVEL:
            return False
        start = self.entries[0].odom_pose
        end = self.entries[-1].odom_pose
        return start.distance_to(end) < REVISIT_DISTANCE

    def try_close_loop(self) -> LoopClosure | None:
        """Correct accumulated drift if the run returned to its start.

        Returns None (leaving the session untouched) when no revisit is
        detected or the end scan cannot be matched against the start
        region confidently.
        """
        if not self.revisit_detected():
            return None
        res = self.belief.resolution
        start_map = MapBelief.empty(res, self.belief.width, self.belief.height)
        for entry in self.entries[:START_REGION_SCANS]:
            integrate_scan(start_map, entry.odom_pose, entry.scan)
        odom_end = self.entries[-1].odom_pose
        matched, score = match_scan(
            start_map.occupied_cells(),
            res,
            odom_end,
            self.entries[-1].scan,
            window_pos=LOOP_WINDOW_POS,
            window_angle=LOOP_WINDOW_ANGLE,
        )
        if score < LOOP_MATCH_SCORE:
            return None
        delta = (
            matched.x - odom_end.x,
            matched.y - odom_end.y,
            wrap_angle(matched.theta - odom_end.theta),
        )
        n = len(self.entries)
        corrected: list[Pose2D] = []
        for i, entry in enumerate(self.entries):
            frac = i / (n - 1)
            p = entry.odom_pose
            corrected.append(
                Pose2D(
                    p.x + frac * delta[0],
                    p.y + frac * delta[1],
                    wrap_angle(p.theta + frac * delta[2]),
                )
            )
        rebuilt = MapBelief.empty(res, self.belief.width, self.belief.height)
        for entry, pose in zip(self.entries, corrected):
            integrate_scan(rebuilt, pose, entry.scan)
        self.belief = rebuilt
        self.corrected = corrected
        self.closure = LoopClosure(delta, score, corrected[-1])
        return self.closure


def to_occupancy(belief: MapBelief) -> OccupancyGrid:
    """Threshold the belief: positive evidence occupied, negative free."""
    cells = np.full(belief.log_odds.shape, UNKNOWN_VALUE, dtype=np.uint8)
    cells[belief.log_odds > 0.0] = OCCUPIED_VALUE
    cells[belief.log_odds < 0.0] = FREE_VALUE
    return OccupancyGrid(belief.resolution, cells)


def encode_map(grid: OccupancyGrid) -> bytes:
    header = MAP_MAGIC + struct.pack("<dII", grid.resolution, grid.width, grid.height)
    return header + grid.cells.tobytes()


def decode_map(blob: bytes) -> OccupancyGrid:
    if blob[: len(MAP_MAGIC)] != MAP_MAGIC:
        raise ValueError("not a map file: bad magic")
    offset = len(MAP_MAGIC)
    resolution, width, height = struct.unpack_from("<dII", blob, offset)
    offset += struct.calcsize("<dII")
    expected = width * height
    body = blob[offset : offset + expected]
    if len(body) != expected:
        raise ValueError("map file truncated")
    cells = np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()
    return OccupancyGrid(resolution, cells)


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".goals.json")


def save_map(
    path: str | Path, grid: OccupancyGrid, goals: dict[str, tuple[float, float]]
) -> None:
    """Write the binary grid plus a JSON sidecar of named goals."""
    path = Path(path)
    path.write_bytes(encode_map(grid))
    payload = {"goals": {label: [float(x), float(y)] for label, (x, y) in goals.items()}}
    _sidecar_path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_map(path: str | Path) -> tuple[OccupancyGrid, dict[str, tuple[float, float]]]:
    path = Path(path)
    grid = decode_map(path.read_bytes())
    goals: dict[str, tuple[float, float]] = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        payload = json.loads(sidecar.read_text())
        for label, xy in payload.get("goals", {}).items():
            goals[label] = (float(xy[0]), float(xy[1]))
    return grid, goals
