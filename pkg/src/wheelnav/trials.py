"""Repeatable navigation trials and their reporting.

A trial drops the chair at the world spawn with a prebuilt map, sets one
goal, and runs the full stack until the goal is reached, something is
hit, recovery gives up, or time runs out. Suites bundle trials per goal
selection and with the dynamic obstacles on or off; summaries average
distance and time over the successful runs only.

Maps are prebuilt by a survey pass: the sensor is swept along the
goal-to-goal routes at true poses with noise disabled, so the map is
honestly sensor-built but free of odometry drift.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from wheelnav.arbiter import Mode
from wheelnav.costmap import build_static_costmap
from wheelnav.mapping import (
    OCCUPIED_VALUE,
    MapBelief,
    OccupancyGrid,
    integrate_scan,
    to_occupancy,
)
from wheelnav.pipeline import NavStack, TickResult, tick_json_line
from wheelnav.planner import NoPathError, PlanningError, TrackerParams, plan_global
from wheelnav.sim import (
    TICK_DT,
    OdomNoiseModel,
    SensorModel,
    SimState,
    _polyline_lengths,
    cast_scan,
    wall_clearance,
)
from wheelnav.types import Pose2D
from wheelnav.world import WorldSpec, _segment_distance, rasterize

DEFAULT_TIMEOUT = 400.0  # s
GOAL_PROOF_TOLERANCE = 0.3  # m, judged on the true pose
# the tracker stops on the estimate, so it aims tighter than the proof
# tolerance: the margin between the two is the localization error the
# trial can absorb at the finish line
TRIAL_GOAL_TOLERANCE = 0.12  # m
NEAR_WALL_DISTANCE = 0.45  # m true clearance that earns a remark

# survey pass spacing
_SURVEY_STEP = 0.2  # m between scan poses along the route
_SURVEY_SPIN_EVERY = 2.0  # m between full look-arounds
_SURVEY_HEADINGS = 16


@dataclass(frozen=True)
class TrialSpec:
    world: WorldSpec
    goal: str | tuple[float, float]
    mode: Mode = Mode.AUTONOMOUS
    seed: int = 0
    timeout: float = DEFAULT_TIMEOUT
    dynamic: bool = True
    user_model: str = "idle"  # "idle" | "follower"


@dataclass(frozen=True)
class TrialRecord:
    trial_no: int
    distance_m: float
    time_s: float
    goal_reached: bool
    remarks: tuple[str, ...]
    seed: int
    collided: bool
    aborted: bool
    tick_log: tuple[str, ...] = ()


@dataclass(frozen=True)
class Summary:
    trials: int
    successes: int
    success_rate: float
    avg_distance_m: float  # over successes only; nan when none
    avg_time_s: float


def build_world_map(
    spec: WorldSpec, sensor: SensorModel | None = None
) -> tuple[OccupancyGrid, dict[str, tuple[float, float]]]:
    """Survey the world into an occupancy map before any trials run.

    Scans are cast noise-free from true poses along the planned spawn to
    goal routes, with a full rotation every couple of meters so rooms are
    swept, then thresholded into the tri-state grid trials localize on.
    """
    sensor = sensor or SensorModel()
    grid = rasterize(spec)
    truth = OccupancyGrid(
        spec.resolution,
        np.where(grid.occupied, OCCUPIED_VALUE, 0).astype(np.uint8),
    )
    cm = build_static_costmap(truth)
    belief = MapBelief.empty(spec.resolution, spec.width, spec.height)
    no_dyn = np.empty((0, 2), dtype=np.float64)
    no_radii = np.empty(0, dtype=np.float64)

    def observe(pose: Pose2D) -> None:
        scan = cast_scan(grid, sensor, pose, no_dyn, no_radii, 0.0, None)
        integrate_scan(belief, pose, scan)

    def spin(x: float, y: float) -> None:
        for k in range(_SURVEY_HEADINGS):
            observe(Pose2D(x, y, -math.pi + k * (2.0 * math.pi / _SURVEY_HEADINGS)))

    targets = [(x, y) for _, x, y in spec.named_goals]
    route = [(spec.spawn.x, spec.spawn.y)] + targets + [(spec.spawn.x, spec.spawn.y)]
    spin(route[0][0], route[0][1])
    since_spin = 0.0
    for a, b in zip(route[:-1], route[1:]):
        leg = plan_global(cm, a, b)
        wp = leg.waypoints
        seg = np.sqrt(((wp[1:] - wp[:-1]) ** 2).sum(axis=1))
        acc = 0.0
        for i in range(seg.shape[0]):
            acc += float(seg[i])
            since_spin += float(seg[i])
            if acc >= _SURVEY_STEP:
                acc = 0.0
                heading = math.atan2(
                    wp[i + 1, 1] - wp[i, 1], wp[i + 1, 0] - wp[i, 0]
                )
                observe(Pose2D(float(wp[i + 1, 0]), float(wp[i + 1, 1]), heading))
                if since_spin >= _SURVEY_SPIN_EVERY:
                    since_spin = 0.0
                    spin(float(wp[i + 1, 0]), float(wp[i + 1, 1]))
        spin(b[0], b[1])
    goals = {label: (x, y) for label, x, y in spec.named_goals}
    return to_occupancy(belief), goals


class _FollowerUser:
    """Semi-autonomous test driver: steers at the path sloppily.

    Pushes the stick toward the next waypoint with a slow sinusoidal
    missteer plus noise, which makes it drift off the plan often enough
    to exercise the deviation takeover.
    """

    def __init__(self, seed: int, wobble: float = 0.6):
        self.rng = np.random.default_rng(seed + 7919)
        self.wobble = wobble

    def command(self, stack: NavStack, now: float) -> tuple[float, float]:
        if stack.path is None or len(stack.path) == 0:
            return 0.0, 0.0
        pose = stack.est_pose
        wp = stack.path.waypoints
        d = np.sqrt((wp[:, 0] - pose.x) ** 2 + (wp[:, 1] - pose.y) ** 2)
        j = min(int(np.argmin(d)) + 8, wp.shape[0] - 1)
        bearing = math.atan2(wp[j, 1] - pose.y, wp[j, 0] - pose.x)
        err = bearing - pose.theta
        err = math.atan2(math.sin(err), math.cos(err))
        err += self.wobble * math.sin(0.35 * now) + 0.15 * float(self.rng.standard_normal())
        turn = max(-1.0, min(1.0, 1.2 * err))
        fwd = 1.0 if abs(err) < 1.2 else 0.2
        return fwd, turn


def _randomize_obstacle_phases(state: SimState, seed: int) -> None:
    """Start each walker somewhere along its route, drawn from the trial seed.

    Otherwise every seed meets every obstacle at the identical spot and the
    suite's success rate collapses to a single repeated outcome.
    """
    if not state.spec.dynamic_obstacles:
        return
    rng = np.random.default_rng(seed + 15485863)
    for i, obs in enumerate(state.spec.dynamic_obstacles):
        _, total = _polyline_lengths(obs.waypoints)
        if total > 0.0:
            state.dyn_phase[i] = float(rng.uniform(0.0, 2.0 * total))


def run_trial(
    spec: TrialSpec,
    occ_map: OccupancyGrid,
    goals: dict[str, tuple[float, float]] | None = None,
    *,
    trial_no: int = 1,
    collect_ticks: bool = False,
    odom_noise: OdomNoiseModel | None = None,
) -> TrialRecord:
    """Run one full trial to termination and fold events into remarks."""
    stack = NavStack(
        spec.world,
        occ_map=occ_map,
        goals=goals,
        mode=spec.mode,
        seed=spec.seed,
        odom_noise=odom_noise,
        tracker=TrackerParams(goal_tolerance=TRIAL_GOAL_TOLERANCE),
        dynamics_enabled=spec.dynamic,
    )
    if spec.dynamic:
        _randomize_obstacle_phases(stack.sim, spec.seed)
    goal_xy = stack.set_goal(spec.goal)
    user = _FollowerUser(spec.seed) if spec.user_model == "follower" else None

    remarks: list[str] = []
    seen: set[str] = set()

    def remark(tag: str) -> None:
        if tag not in seen:
            seen.add(tag)
            remarks.append(tag)

    tick_log: list[str] = []
    max_ticks = int(round(spec.timeout / TICK_DT))
    result: TickResult | None = None
    for _ in range(max_ticks):
        if user is not None:
            fwd, turn = user.command(stack, stack.sim.sim_time)
            stack.submit_joystick(fwd, turn, stack.sim.sim_time)
        result = stack.tick()
        for event in result.events:
            if event == "collision":
                remark("collision")
            elif event == "stuck_reset":
                remark("stuck_reset")
            elif event.startswith("recovery:"):
                remark(f"recovery({event.split(':', 1)[1]})")
            elif event == "spin":
                remark("spin")
        if wall_clearance(stack.sim.grid, stack.sim.true_pose, 0.6) < NEAR_WALL_DISTANCE:
            remark("near_wall")
        if collect_ticks:
            tick_log.append(tick_json_line(result))
        if result.collided or result.aborted or result.goal_reached:
            break
    assert result is not None
    timed_out = not (result.collided or result.aborted or result.goal_reached)
    if timed_out:
        remark("timeout")
    true_at_goal = (
        math.hypot(
            stack.sim.true_pose.x - goal_xy[0], stack.sim.true_pose.y - goal_xy[1]
        )
        <= GOAL_PROOF_TOLERANCE
    )
    success = result.goal_reached and true_at_goal and not result.collided
    return TrialRecord(
        trial_no=trial_no,
        distance_m=stack.total_distance,
        time_s=stack.sim.sim_time,
        goal_reached=success,
        remarks=tuple(remarks),
        seed=spec.seed,
        collided=result.collided,
        aborted=result.aborted,
        tick_log=tuple(tick_log),
    )




def summarize(records: list[TrialRecord]) -> Summary:
    """Success rate plus distance and time averaged over successes only."""
    n = len(records)
    wins = [r for r in records if r.goal_reached]
    if wins:
        avg_d = sum(r.distance_m for r in wins) / len(wins)
        avg_t = sum(r.time_s for r in wins) / len(wins)
    else:
        avg_d = math.nan
        avg_t = math.nan
    return Summary(
        trials=n,
        successes=len(wins),
        success_rate=len(wins) / n if n else 0.0,
        avg_distance_m=avg_d,
        avg_time_s=avg_t,
    )


def render_csv(records: list[TrialRecord]) -> str:
    """Trial table with the remarks column ';'-joined and always quoted."""
    buf = io.StringIO()
    buf.write("trial_no,distance_m,time_s,goal_reached,remarks\n")
    for r in records:
        buf.write(
            f'{r.trial_no},{r.distance_m:.2f},{r.time_s:.2f},'
            f'{"true" if r.goal_reached else "false"},"{";".join(r.remarks)}"\n'
        )
    return buf.getvalue()


def render_summary(name: str, summary: Summary) -> str:
    avg_d = "n/a" if math.isnan(summary.avg_distance_m) else f"{summary.avg_distance_m:.2f}"
    avg_t = "n/a" if math.isnan(summary.avg_time_s) else f"{summary.avg_time_s:.1f}"
    return (
        f"suite {name}: {summary.successes}/{summary.trials} succeeded "
        f"({summary.success_rate:.0%}), avg distance {avg_d} m, avg time {avg_t} s "
        f"over successes\n"
    )


@dataclass(frozen=True)
class SuiteSpec:
    goal_index: int | None  # None: per-trial random reachable goal
    dynamic: bool

    @property
    def pass_threshold(self) -> float:
        return 0.7 if self.dynamic else 1.0


SUITES: dict[str, SuiteSpec] = {
    "static_goal1": SuiteSpec(0, False),
    "static_goal2": SuiteSpec(1, False),
    "static_random": SuiteSpec(None, False),
    "dynamic_goal1": SuiteSpec(0, True),
    "dynamic_goal2": SuiteSpec(1, True),
    "dynamic_random": SuiteSpec(None, True),
}


def _walker_track_distance(spec: WorldSpec, x: float, y: float) -> float:
    """Distance from a point to the nearest dynamic obstacle polyline."""
    best = math.inf
    for obs in spec.dynamic_obstacles:
        pts = obs.waypoints
        if len(pts) == 1:
            best = min(best, math.hypot(x - pts[0][0], y - pts[0][1]))
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            best = min(best, _segment_distance(x, y, x0, y0, x1, y1))
    return best


GOAL_LANE_CLEARANCE = 1.2  # m, goals are not placed on a walker's track
GOAL_FEATURE_RANGE = 2.5  # m, goals need some mapped structure in sensor reach


def sample_random_goal(
    spec: WorldSpec,
    occ_map: OccupancyGrid,
    rng: np.random.Generator,
    min_distance: float = 3.0,
) -> tuple[float, float]:
    """Seeded draw of a reachable goal cell well away from the spawn."""
    cm = build_static_costmap(occ_map)
    res = occ_map.resolution
    free_rows, free_cols = np.nonzero(cm.composed() < 128)
    if free_rows.shape[0] == 0:
        raise NoPathError("map has no comfortably free cells")
    occ_rows, occ_cols = np.nonzero(occ_map.occupied_u8())
    occ_x = (occ_cols + 0.5) * res
    occ_y = (occ_rows + 0.5) * res
    for _ in range(64):
        i = int(rng.integers(free_rows.shape[0]))
        x = (free_cols[i] + 0.5) * res
        y = (free_rows[i] + 0.5) * res
        if math.hypot(x - spec.spawn.x, y - spec.spawn.y) < min_distance:
            continue
        if _walker_track_distance(spec, x, y) < GOAL_LANE_CLEARANCE:
            continue
        if occ_x.shape[0] > 0:
            d2 = (occ_x - x) ** 2 + (occ_y - y) ** 2
            if float(d2.min()) > GOAL_FEATURE_RANGE**2:
                continue
        try:
            plan_global(cm, (spec.spawn.x, spec.spawn.y), (x, y))
        except PlanningError:
            continue
        return (x, y)
    raise NoPathError("could not sample a reachable goal")


def run_suite(
    spec: WorldSpec,
    suite_name: str,
    *,
    trials: int = 10,
    base_seed: int = 0,
    occ_map: OccupancyGrid | None = None,
    goals: dict[str, tuple[float, float]] | None = None,
    collect_ticks: bool = False,
) -> tuple[list[TrialRecord], Summary]:
    """Run one suite against a (possibly prebuilt) map of the world."""
    suite = SUITES[suite_name]
    if occ_map is None:
        occ_map, goals = build_world_map(spec)
    if goals is None:
        goals = {label: (x, y) for label, x, y in spec.named_goals}
    records: list[TrialRecord] = []
    for k in range(trials):
        seed = base_seed + k
        if suite.goal_index is None:
            rng = np.random.default_rng(seed + 104729)
            goal: str | tuple[float, float] = sample_random_goal(spec, occ_map, rng)
        else:
            labels = list(goals)
            goal = labels[suite.goal_index % len(labels)]
        trial = TrialSpec(
            world=spec,
            goal=goal,
            seed=seed,
            dynamic=suite.dynamic,
        )
        records.append(
            run_trial(
                trial,
                occ_map,
                goals,
                trial_no=k + 1,
                collect_ticks=collect_ticks,
            )
        )
    return records, summarize(records)
