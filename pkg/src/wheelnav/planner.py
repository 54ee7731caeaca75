"""Global planning on the costmap plus local path tracking and recovery.

The global planner is 8-connected A* whose edge weight is the move length
scaled by (1 + cost/64); anything at or above the inscribed cost is
impassable. The tracker is a pure-pursuit follower that slows down in
high-cost corridors and rotates in place when the path leads behind the
chair. Recovery is a fixed escalation ladder that alternately relaxes the
dynamic layer and spins to refresh it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from wheelnav import kernels
from wheelnav.costmap import INSCRIBED, Costmap, cost_at
from wheelnav.sim import FOOTPRINT_RADIUS
from wheelnav.types import Pose2D, Twist2D, VelocityLimits, wrap_angle

SQRT2 = math.sqrt(2.0)

CONSERVATIVE_CLEAR_RADIUS = 3.0  # m, forget dynamic marks beyond sensor reach
AGGRESSIVE_CLEAR_RADIUS = FOOTPRINT_RADIUS  # m, forget all but the footprint

RECOVERY_STAGES = (
    "none",
    "conservative_clear",
    "rotate_1",
    "aggressive_clear",
    "rotate_2",
    "aborted",
)


class PlanningError(Exception):
    """Base class for global planning failures."""


class NoPathError(PlanningError):
    """Goal unreachable on the current costmap."""


class StartBlockedError(PlanningError):
    """Start cell is at or above the inscribed cost."""


@dataclass(frozen=True)
class Path:
    """Cell-center waypoints from start to goal plus the exact plan cost."""

    waypoints: NDArray[np.float64]  # (n, 2) world x, y
    cells: NDArray[np.int64]  # (n, 2) row, col
    total_cost: float
    goal: tuple[float, float]

    def __len__(self) -> int:
        return self.waypoints.shape[0]


@dataclass(frozen=True)
class TrackerParams:
    lookahead: float = 0.6  # m
    goal_tolerance: float = 0.3  # m
    slowdown_cost: float = 128.0  # cost where speed starts dropping
    crawl_speed: float = 0.1  # m/s floor when nearly blocked


@dataclass(frozen=True)
class StuckParams:
    window: float = 10.0  # s
    min_displacement: float = 0.05  # m over the window


@dataclass(frozen=True)
class RecoveryState:
    stage: str = "none"


@dataclass(frozen=True)
class RecoveryAction:
    kind: str  # "clear" | "rotate" | "abort"
    clear_beyond: float = 0.0
    rotate_angle: float = 0.0


def plan_global(
    cm: Costmap, start: tuple[float, float], goal: tuple[float, float]
) -> Path:
    """A* from start to goal over the composed costmap.

    Raises StartBlockedError when the start cell is impassable and
    NoPathError when the goal is blocked, unknown, outside the map, or
    simply unreachable. Deterministic: equal inputs give equal paths.
    """
    res = cm.resolution
    sc = int(math.floor(start[0] / res))
    sr = int(math.floor(start[1] / res))
    gc = int(math.floor(goal[0] / res))
    gr = int(math.floor(goal[1] / res))
    if not (0 <= sr < cm.height and 0 <= sc < cm.width):
        raise StartBlockedError(f"start {start} outside the map")
    if not (0 <= gr < cm.height and 0 <= gc < cm.width):
        raise NoPathError(f"goal {goal} outside the map")
    composed = cm.composed()
    if composed[sr, sc] >= INSCRIBED:
        raise StartBlockedError(f"start cell ({sr}, {sc}) blocked")
    status, idxs, g_a, g_b = kernels.astar_grid(
        composed, sr, sc, gr, gc, res, res / 64.0, INSCRIBED
    )
    if status != 0:
        raise NoPathError(f"no route to goal {goal}")
    rows = idxs // cm.width
    cols = idxs % cm.width
    cells = np.stack([rows, cols], axis=1)
    waypoints = np.stack([(cols + 0.5) * res, (rows + 0.5) * res], axis=1)
    total = (float(g_a) + float(g_b) * SQRT2) * (res / 64.0)
    return Path(waypoints=waypoints, cells=cells, total_cost=total, goal=goal)


def find_planning_start(
    cm: Costmap, x: float, y: float, radius: float = 0.3
) -> tuple[float, float]:
    """Nearest passable cell center within radius, the point itself first.

    Lets planning proceed when the chair center has drifted into the
    inscribed band without being physically in contact.
    """
    res = cm.resolution
    col = int(math.floor(x / res))
    row = int(math.floor(y / res))
    if 0 <= row < cm.height and 0 <= col < cm.width:
        if max(int(cm.static_cost[row, col]), int(cm.dyn_cost[row, col])) < INSCRIBED:
            return x, y
    reach = int(math.ceil(radius / res))
    best = None
    best_d2 = math.inf
    for dr in range(-reach, reach + 1):
        for dc in range(-reach, reach + 1):
            rr = row + dr
            cc = col + dc
            if not (0 <= rr < cm.height and 0 <= cc < cm.width):
                continue
            if max(int(cm.static_cost[rr, cc]), int(cm.dyn_cost[rr, cc])) >= INSCRIBED:
                continue
            px = (cc + 0.5) * res
            py = (rr + 0.5) * res
            d2 = (px - x) ** 2 + (py - y) ** 2
            if d2 < best_d2 and d2 <= radius * radius:
                best = (px, py)
                best_d2 = d2
    if best is None:
        raise StartBlockedError(f"no passable cell within {radius} m of ({x:.2f}, {y:.2f})")
    return best


def path_blocked(path: Path, cm: Costmap) -> bool:
    """True when any cell of the path is now impassable."""
    rows = path.cells[:, 0]
    cols = path.cells[:, 1]
    static = cm.static_cost[rows, cols].astype(np.int64)
    dyn = cm.dyn_cost[rows, cols].astype(np.int64)
    return bool((np.maximum(static, dyn) >= INSCRIBED).any())


def track_path(
    path: Path,
    pose: Pose2D,
    cm: Costmap,
    limits: VelocityLimits,
    params: TrackerParams | None = None,
) -> tuple[Twist2D, bool]:
    """Pure-pursuit step toward the path; returns (command, goal reached).

    The linear speed scales from v_max down to the crawl floor as the
    lookahead point's cost climbs from slowdown_cost to inscribed. A
    lookahead more than 90 degrees off the heading triggers an in-place
    rotation instead of an arc.
    """
    params = params or TrackerParams()
    gx, gy = path.goal
    if math.hypot(gx - pose.x, gy - pose.y) <= params.goal_tolerance:
        return Twist2D(0.0, 0.0), True
    if len(path) == 0:
        return Twist2D(0.0, 0.0), False
    wp = path.waypoints
    d = np.sqrt((wp[:, 0] - pose.x) ** 2 + (wp[:, 1] - pose.y) ** 2)
    nearest = int(np.argmin(d))
    target = wp[-1]
    for j in range(nearest, wp.shape[0]):
        if d[j] >= params.lookahead:
            target = wp[j]
            break
    tx, ty = float(target[0]), float(target[1])
    alpha = wrap_angle(math.atan2(ty - pose.y, tx - pose.x) - pose.theta)
    if abs(alpha) > math.pi / 2.0:
        w = max(-limits.w_max, min(limits.w_max, 2.0 * alpha))
        return Twist2D(0.0, w), False
    dist = math.hypot(tx - pose.x, ty - pose.y)
    if dist < 1e-9:
        return Twist2D(0.0, 0.0), False
    try:
        c = cost_at(cm, tx, ty)
    except ValueError:
        c = INSCRIBED
    if c >= INSCRIBED:
        v = params.crawl_speed
    elif c <= params.slowdown_cost:
        v = limits.v_max
    else:
        frac = (c - params.slowdown_cost) / (INSCRIBED - params.slowdown_cost)
        v = limits.v_max - frac * (limits.v_max - params.crawl_speed)
    curvature = 2.0 * math.sin(alpha) / dist
    w = max(-limits.w_max, min(limits.w_max, v * curvature))
    return Twist2D(v, w), False


def check_progress(
    history: list[tuple[float, Pose2D]], params: StuckParams | None = None
) -> str:
    """Classify recent motion as 'progressing' or 'stuck'.

    History is (time, pose) oldest first. Stuck means the window is fully
    covered and no pose moved at least min_displacement from the oldest.
    """
    params = params or StuckParams()
    if len(history) < 2:
        return "progressing"
    span = history[-1][0] - history[0][0]
    if span < params.window:
        return "progressing"
    ref = history[0][1]
    moved = max(ref.distance_to(p) for _, p in history)
    return "stuck" if moved < params.min_displacement else "progressing"


def advance_recovery(
    state: RecoveryState, enabled: bool = True
) -> tuple[RecoveryAction, RecoveryState]:
    """Step the escalation ladder; disabled recovery aborts immediately."""
    if not enabled:
        return RecoveryAction("abort"), RecoveryState("aborted")
    idx = RECOVERY_STAGES.index(state.stage)
    nxt = RECOVERY_STAGES[min(idx + 1, len(RECOVERY_STAGES) - 1)]
    if nxt == "conservative_clear":
        action = RecoveryAction("clear", clear_beyond=CONSERVATIVE_CLEAR_RADIUS)
    elif nxt == "aggressive_clear":
        action = RecoveryAction("clear", clear_beyond=AGGRESSIVE_CLEAR_RADIUS)
    elif nxt in ("rotate_1", "rotate_2"):
        action = RecoveryAction("rotate", rotate_angle=2.0 * math.pi)
    else:
        action = RecoveryAction("abort")
    return action, RecoveryState(nxt)
