"""Full navigation stack wired around the simulator, one tick at a time.

Each tick: sense (every 4th tick), localize against the static map, fold
the scan into the dynamic costmap layer, replan when due, derive the
planner command, arbitrate it against the joystick, step the world, and
dead-reckon the pose belief forward with drifting odometry. The stack
also hosts the mapping workflow used to record a map of a new place.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Any

from wheelnav.arbiter import (
    JoystickCommand,
    Mode,
    SafetyParams,
    arbitrate,
    cross_track_deviation,
    predict_collision,
    scale_joystick,
)
from wheelnav.costmap import (
    Costmap,
    InflationParams,
    build_static_costmap,
    clear_dynamic_beyond,
    mark_and_clear,
)
from wheelnav.mapping import (
    CONF_TRACKING,
    MappingSession,
    OccupancyGrid,
    localize,
    to_occupancy,
)
from wheelnav.planner import (
    Path,
    PlanningError,
    RecoveryState,
    StuckParams,
    TrackerParams,
    advance_recovery,
    check_progress,
    find_planning_start,
    path_blocked,
    plan_global,
    track_path,
)
from wheelnav.sim import (
    TICK_DT,
    TICKS_PER_SCAN,
    DepthScan,
    OdomNoiseModel,
    SensorModel,
    SimState,
    drift_odometry,
    make_sim,
    sense_depth,
    step_world,
)
from wheelnav.types import Pose2D, Twist2D, VelocityLimits, ZERO_TWIST
from wheelnav.world import WorldSpec

REPLAN_PERIOD = 2.0  # s between routine replans while a goal is active
RECOVERY_RESET_DISTANCE = 0.25  # m of motion that counts as recovered


@dataclass(frozen=True)
class TickResult:
    """Snapshot of one control cycle, before-the-step time base."""

    tick: int
    sim_time: float
    true_pose: Pose2D
    est_pose: Pose2D
    confidence: str
    executed: Twist2D
    authority: str
    reason: str
    mode: Mode
    deviation: float
    prediction: float | None
    events: tuple[str, ...]
    scan: DepthScan | None
    goal: tuple[float, float] | None
    goal_reached: bool
    collided: bool
    aborted: bool
    distance: float


def tick_json_line(r: TickResult) -> str:
    """One tick as a canonical JSON line, shared by trial logs and replays."""
    return json.dumps(
        {
            "tick": r.tick,
            "t": r.sim_time,
            "true": [r.true_pose.x, r.true_pose.y, r.true_pose.theta],
            "est": [r.est_pose.x, r.est_pose.y, r.est_pose.theta],
            "cmd": [r.executed.v, r.executed.w],
            "authority": r.authority,
            "reason": r.reason,
            "deviation": r.deviation,
            "events": list(r.events),
        },
        separators=(",", ":"),
        sort_keys=True,
    )


class NavStack:
    """Owns the simulator plus every navigation component for one run."""

    def __init__(
        self,
        spec: WorldSpec,
        *,
        occ_map: OccupancyGrid | None = None,
        goals: dict[str, tuple[float, float]] | None = None,
        mode: Mode = Mode.AUTONOMOUS,
        seed: int = 0,
        sensor: SensorModel | None = None,
        odom_noise: OdomNoiseModel | None = None,
        limits: VelocityLimits | None = None,
        inflation: InflationParams | None = None,
        tracker: TrackerParams | None = None,
        safety: SafetyParams | None = None,
        stuck: StuckParams | None = None,
        recovery_enabled: bool = True,
        dynamics_enabled: bool = True,
    ) -> None:
        self.spec = spec
        self.sensor = sensor or SensorModel()
        self.limits = limits or VelocityLimits()
        self.odom_noise = odom_noise or OdomNoiseModel()
        self.inflation = inflation or InflationParams()
        self.tracker = tracker or TrackerParams()
        self.safety = safety or SafetyParams()
        self.stuck = stuck or StuckParams()
        self.recovery_enabled = recovery_enabled
        self.mode = mode
        self.sim: SimState = make_sim(
            spec,
            seed=seed,
            sensor=self.sensor,
            limits=self.limits,
            dynamics_enabled=dynamics_enabled,
        )
        self.goals: dict[str, tuple[float, float]] = dict(goals or {})
        if not self.goals:
            self.goals = {label: (x, y) for label, x, y in spec.named_goals}

        self.map_grid: OccupancyGrid | None = None
        self.occ_u8 = None
        self.cm: Costmap | None = None
        if occ_map is not None:
            self._install_map(occ_map)
        self.session: MappingSession | None = None

        self.odom_pose: Pose2D = spec.spawn
        self.est_pose: Pose2D = spec.spawn
        self.confidence: str = CONF_TRACKING
        self.joystick: JoystickCommand | None = None

        self.goal: tuple[float, float] | None = None
        self.goal_label: str | None = None
        self.path: Path | None = None
        self.goal_reached = False
        self.aborted = False

        self.latched = False
        self.recovery = RecoveryState()
        self._recovery_entry: Pose2D | None = None
        self.rotate_remaining = 0.0
        self._history: deque[tuple[float, Pose2D]] = deque()
        self._last_plan_time = -math.inf
        self._replan_flag = False
        self.total_distance = 0.0

    # -- configuration -------------------------------------------------

    def _install_map(self, grid: OccupancyGrid) -> None:
        if abs(grid.resolution - self.spec.resolution) > 1e-12:
            raise ValueError("map resolution does not match the world")
        self.map_grid = grid
        self.occ_u8 = grid.occupied_u8()
        self.cm = build_static_costmap(grid, self.inflation)

    def set_mode(self, mode: Mode) -> None:
        self.mode = mode
        self.latched = False

    def submit_joystick(self, forward: float, turn: float, timestamp: float) -> None:
        self.joystick = JoystickCommand(forward, turn, timestamp)

    def set_goal(self, goal: str | tuple[float, float]) -> tuple[float, float]:
        """Accepts a named goal or raw coordinates; arms replanning."""
        if self.cm is None:
            raise RuntimeError("no map loaded; finish mapping before setting goals")
        if isinstance(goal, str):
            if goal not in self.goals:
                raise KeyError(f"no goal named {goal!r}")
            self.goal_label = goal
            self.goal = self.goals[goal]
        else:
            self.goal_label = None
            self.goal = (float(goal[0]), float(goal[1]))
        self.goal_reached = False
        self.aborted = False
        self.path = None
        self.recovery = RecoveryState()
        self._recovery_entry = None
        self.rotate_remaining = 0.0
        self._history.clear()
        self._replan_flag = True
        self._last_plan_time = -math.inf
        return self.goal

    def clear_goal(self) -> None:
        self.goal = None
        self.goal_label = None
        self.path = None
        self.goal_reached = False
        self.rotate_remaining = 0.0
        self._history.clear()

    # -- mapping workflow ----------------------------------------------

    def start_mapping(self) -> None:
        self.session = MappingSession(
            self.spec.resolution, self.spec.width, self.spec.height
        )
        self.clear_goal()
        self.map_grid = None
        self.occ_u8 = None
        self.cm = None

    def finish_mapping(self) -> dict[str, Any]:
        """Attempt loop closure, freeze the map, return to localization."""
        if self.session is None:
            raise RuntimeError("not mapping")
        closure = self.session.try_close_loop()
        grid = to_occupancy(self.session.belief)
        self._install_map(grid)
        if closure is not None:
            self.est_pose = closure.corrected_end
            self.odom_pose = closure.corrected_end
        self.session = None
        return {
            "loop_closed": closure is not None,
            "score": closure.score if closure else 0,
            "delta": closure.delta if closure else (0.0, 0.0, 0.0),
        }

    # -- core loop -------------------------------------------------------

    def _apply_recovery(self, action, events: list[str]) -> None:
        events.append(f"recovery:{self.recovery.stage}")
        self._recovery_entry = self.est_pose
        if action.kind == "clear" and self.cm is not None:
            clear_dynamic_beyond(self.cm, self.est_pose, action.clear_beyond)
            if self.goal is not None:
                try:
                    start = find_planning_start(self.cm, self.est_pose.x, self.est_pose.y)
                    self.path = plan_global(self.cm, start, self.goal)
                    events.append("replanned")
                except PlanningError:
                    self._replan_flag = True
        elif action.kind == "rotate":
            self.rotate_remaining = action.rotate_angle
            events.append("spin")
        elif action.kind == "abort":
            self.aborted = True
            self.path = None
            events.append("aborted")

    def _replan(self, now: float, events: list[str]) -> None:
        self._replan_flag = False
        self._last_plan_time = now
        assert self.cm is not None and self.goal is not None
        try:
            start = find_planning_start(self.cm, self.est_pose.x, self.est_pose.y)
            self.path = plan_global(self.cm, start, self.goal)
            events.append("replanned")
        except PlanningError:
            self.path = None
            events.append("plan_failed")
            action, self.recovery = advance_recovery(self.recovery, self.recovery_enabled)
            self._apply_recovery(action, events)

    def tick(self) -> TickResult:
        events: list[str] = []
        now = self.sim.sim_time
        tick_no = self.sim.tick
        scan: DepthScan | None = None

        if tick_no % TICKS_PER_SCAN == 0:
            scan = sense_depth(self.sim)
            if self.session is not None:
                self.session.add_scan(tick_no, self.odom_pose, scan)
            elif self.cm is not None:
                est = localize(self.occ_u8, self.spec.resolution, self.est_pose, scan)
                self.confidence = est.confidence
                if est.confidence == CONF_TRACKING:
                    self.est_pose = est.pose
                changed = mark_and_clear(self.cm, self.est_pose, scan)
                if changed and self.path is not None and path_blocked(self.path, self.cm):
                    self._replan_flag = True
                    events.append("path_blocked")

        goal_active = (
            self.goal is not None
            and not self.goal_reached
            and not self.aborted
            and self.cm is not None
        )
        planner_twist = ZERO_TWIST
        if goal_active:
            if self.rotate_remaining > 0.0:
                planner_twist = Twist2D(0.0, self.limits.w_max)
                self.rotate_remaining -= self.limits.w_max * TICK_DT
                if self.rotate_remaining <= 0.0:
                    self.rotate_remaining = 0.0
                    self._replan_flag = True
            else:
                if (
                    self.path is None
                    or self._replan_flag
                    or now - self._last_plan_time >= REPLAN_PERIOD
                ):
                    self._replan(now, events)
                if self.path is not None:
                    planner_twist, reached = track_path(
                        self.path, self.est_pose, self.cm, self.limits, self.tracker
                    )
                    if reached:
                        self.goal_reached = True
                        planner_twist = ZERO_TWIST
                        events.append("goal_reached")
            goal_active = not self.goal_reached and not self.aborted

        user_twist = scale_joystick(
            self.joystick, self.limits, now, self.safety.deadman_timeout
        )
        deviation = (
            cross_track_deviation(self.est_pose, self.path)
            if goal_active and self.path is not None
            else 0.0
        )
        prediction = None
        if self.cm is not None and self.mode is not Mode.AUTONOMOUS:
            prediction = predict_collision(self.est_pose, user_twist, self.cm, self.safety)
        decision, self.latched = arbitrate(
            self.mode,
            user_twist,
            planner_twist,
            deviation,
            prediction,
            self.latched,
            self.safety,
            self.limits,
        )
        was_collided = self.sim.collided
        step_world(self.sim, decision.twist)
        executed = self.sim.last_twist
        if self.sim.collided and not was_collided:
            events.append("collision")
        delta = drift_odometry(executed, TICK_DT, self.odom_noise, self.sim.rng)
        self.odom_pose = self.odom_pose.compose(*delta)
        self.est_pose = self.est_pose.compose(*delta)
        self.total_distance += abs(executed.v) * TICK_DT

        if goal_active and self.rotate_remaining == 0.0:
            self._history.append((now, self.est_pose))
            while len(self._history) > 2 and self._history[1][0] <= now - self.stuck.window:
                self._history.popleft()
            if check_progress(list(self._history), self.stuck) == "stuck":
                events.append("stuck_reset")
                self._history.clear()
                self._replan_flag = True
                action, self.recovery = advance_recovery(self.recovery, self.recovery_enabled)
                self._apply_recovery(action, events)
        elif not goal_active:
            self._history.clear()

        if (
            self.recovery.stage not in ("none", "aborted")
            and self._recovery_entry is not None
            and self.rotate_remaining == 0.0
            and self.est_pose.distance_to(self._recovery_entry) > RECOVERY_RESET_DISTANCE
        ):
            self.recovery = RecoveryState()
            self._recovery_entry = None
            events.append("recovered")

        return TickResult(
            tick=tick_no,
            sim_time=now,
            true_pose=self.sim.true_pose,
            est_pose=self.est_pose,
            confidence=self.confidence,
            executed=executed,
            authority=decision.authority,
            reason=decision.reason,
            mode=self.mode,
            deviation=deviation,
            prediction=prediction,
            events=tuple(events),
            scan=scan,
            goal=self.goal,
            goal_reached=self.goal_reached,
            collided=self.sim.collided,
            aborted=self.aborted,
            distance=self.total_distance,
        )
