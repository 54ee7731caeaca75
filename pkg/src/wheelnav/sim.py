"""Deterministic fixed-step simulator for a differential-drive chair.

The simulator advances in 0.05 s ticks (20 Hz); the depth sensor fires
every 4th tick (5 Hz). All randomness flows through the single generator
owned by ``SimState``, so a seed fully determines a run. Kinematics use
the exact unicycle arc, never an Euler step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from wheelnav import kernels
from wheelnav.types import Pose2D, Twist2D, VelocityLimits, wrap_angle
from wheelnav.world import GroundTruthGrid, WorldSpec, rasterize

TICK_DT = 0.05
TICKS_PER_SCAN = 4
FOOTPRINT_RADIUS = 0.35

# ray march step: quarter cell, fine enough that single-cell walls cannot
# be stepped over at any incidence the closed worlds produce
RAY_STEP_FRACTION = 0.25


@dataclass(frozen=True)
class SensorModel:
    """Front-mounted depth camera abstracted to a planar range fan."""

    fov: float = 1.518  # rad, 87 degrees
    beam_count: int = 64
    min_range: float = 0.3  # m
    max_range: float = 3.0  # m
    noise_sigma: float = 0.01  # fraction of range, 1 sigma

    def __post_init__(self) -> None:
        if self.beam_count < 2:
            raise ValueError("beam_count must be at least 2")
        if not 0.0 < self.min_range < self.max_range:
            raise ValueError("need 0 < min_range < max_range")

    @property
    def bearings(self) -> NDArray[np.float64]:
        return _bearings(self.fov, self.beam_count)


@lru_cache(maxsize=8)
def _bearings(fov: float, count: int) -> NDArray[np.float64]:
    out = np.linspace(-fov / 2.0, fov / 2.0, count)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class OdomNoiseModel:
    """Wheel-odometry error: multiplicative twist noise plus heading drift."""

    v_sigma: float = 0.03  # fraction of v, 1 sigma
    w_sigma: float = 0.03  # fraction of w, 1 sigma
    heading_bias: float = 0.002  # rad/s, constant bias

    def __post_init__(self) -> None:
        if self.v_sigma < 0.0 or self.w_sigma < 0.0:
            raise ValueError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class DepthScan:
    """One sensor sweep. Range is inf where nothing was hit in reach."""

    timestamp: float
    bearings: NDArray[np.float64]
    ranges: NDArray[np.float64]
    max_range: float

    @property
    def hit_mask(self) -> NDArray[np.bool_]:
        return np.isfinite(self.ranges)


@dataclass
class SimState:
    """Complete mutable world state; owns the run's random generator."""

    spec: WorldSpec
    grid: GroundTruthGrid
    sensor: SensorModel
    limits: VelocityLimits
    rng: np.random.Generator
    dynamics_enabled: bool
    true_pose: Pose2D
    dyn_phase: NDArray[np.float64]
    tick: int = 0
    collided: bool = False
    last_twist: Twist2D = field(default_factory=lambda: Twist2D(0.0, 0.0))

    @property
    def sim_time(self) -> float:
        return self.tick * TICK_DT


def make_sim(
    spec: WorldSpec,
    *,
    seed: int = 0,
    sensor: SensorModel | None = None,
    limits: VelocityLimits | None = None,
    dynamics_enabled: bool = True,
) -> SimState:
    grid = rasterize(spec)
    return SimState(
        spec=spec,
        grid=grid,
        sensor=sensor or SensorModel(),
        limits=limits or VelocityLimits(),
        rng=np.random.default_rng(seed),
        dynamics_enabled=dynamics_enabled,
        true_pose=spec.spawn,
        dyn_phase=np.zeros(len(spec.dynamic_obstacles), dtype=np.float64),
    )


def step_kinematics(pose: Pose2D, twist: Twist2D, dt: float) -> Pose2D:
    """Exact unicycle integration over one step of constant twist."""
    theta_new = wrap_angle(pose.theta + twist.w * dt)
    if abs(twist.w) < 1e-9:
        return Pose2D(
            pose.x + twist.v * dt * math.cos(pose.theta),
            pose.y + twist.v * dt * math.sin(pose.theta),
            theta_new,
        )
    radius = twist.v / twist.w
    raw_theta = pose.theta + twist.w * dt
    return Pose2D(
        pose.x + radius * (math.sin(raw_theta) - math.sin(pose.theta)),
        pose.y - radius * (math.cos(raw_theta) - math.cos(pose.theta)),
        theta_new,
    )


def _polyline_lengths(waypoints: tuple) -> tuple[NDArray[np.float64], float]:
    pts = np.asarray(waypoints, dtype=np.float64)
    seg = np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(axis=1))
    return seg, float(seg.sum())


def obstacle_positions(state: SimState) -> NDArray[np.float64]:
    """Current centers of the dynamic discs, shape (n, 2)."""
    if not state.dynamics_enabled or not state.spec.dynamic_obstacles:
        return np.empty((0, 2), dtype=np.float64)
    out = np.empty((len(state.spec.dynamic_obstacles), 2), dtype=np.float64)
    for i, obs in enumerate(state.spec.dynamic_obstacles):
        pts = np.asarray(obs.waypoints, dtype=np.float64)
        seg, total = _polyline_lengths(obs.waypoints)
        phase = state.dyn_phase[i]
        if total <= 0.0:
            out[i] = pts[0]
            continue
        if obs.loop:
            s = phase % total
        else:
            cycle = phase % (2.0 * total)
            s = total - abs(total - cycle)
        acc = 0.0
        pos = pts[-1]
        for j in range(seg.shape[0]):
            if s <= acc + seg[j] or j == seg.shape[0] - 1:
                frac = 0.0 if seg[j] <= 0.0 else (s - acc) / seg[j]
                frac = min(max(frac, 0.0), 1.0)
                pos = pts[j] + frac * (pts[j + 1] - pts[j])
                break
            acc += seg[j]
        out[i] = pos
    return out


def check_collision(
    grid: GroundTruthGrid,
    pose: Pose2D,
    dyn_positions: NDArray[np.float64],
    dyn_radii: NDArray[np.float64],
    radius: float = FOOTPRINT_RADIUS,
) -> bool:
    """True when the footprint disc overlaps a wall cell or a dynamic disc."""
    res = grid.resolution
    height, width = grid.occupied.shape
    r0 = max(0, int(math.floor((pose.y - radius) / res)))
    r1 = min(height - 1, int(math.floor((pose.y + radius) / res)))
    c0 = max(0, int(math.floor((pose.x - radius) / res)))
    c1 = min(width - 1, int(math.floor((pose.x + radius) / res)))
    if r1 >= r0 and c1 >= c0:
        window = grid.occupied[r0 : r1 + 1, c0 : c1 + 1]
        if window.any():
            ys = (np.arange(r0, r1 + 1) + 0.5) * res
            xs = (np.arange(c0, c1 + 1) + 0.5) * res
            d2 = (ys[:, None] - pose.y) ** 2 + (xs[None, :] - pose.x) ** 2
            if (window & (d2 <= radius * radius)).any():
                return True
    if dyn_positions.shape[0]:
        d = np.sqrt(
            (dyn_positions[:, 0] - pose.x) ** 2 + (dyn_positions[:, 1] - pose.y) ** 2
        )
        if (d <= radius + dyn_radii).any():
            return True
    return False


def wall_clearance(grid: GroundTruthGrid, pose: Pose2D, search: float = 1.0) -> float:
    """Distance from the pose to the nearest occupied cell center."""
    res = grid.resolution
    height, width = grid.occupied.shape
    r0 = max(0, int(math.floor((pose.y - search) / res)))
    r1 = min(height - 1, int(math.floor((pose.y + search) / res)))
    c0 = max(0, int(math.floor((pose.x - search) / res)))
    c1 = min(width - 1, int(math.floor((pose.x + search) / res)))
    window = grid.occupied[r0 : r1 + 1, c0 : c1 + 1]
    if not window.any():
        return math.inf
    ys = (np.arange(r0, r1 + 1) + 0.5) * res
    xs = (np.arange(c0, c1 + 1) + 0.5) * res
    d2 = (ys[:, None] - pose.y) ** 2 + (xs[None, :] - pose.x) ** 2
    return float(np.sqrt(d2[window].min()))


def cast_scan(
    grid: GroundTruthGrid,
    sensor: SensorModel,
    pose: Pose2D,
    dyn_positions: NDArray[np.float64],
    dyn_radii: NDArray[np.float64],
    timestamp: float,
    rng: np.random.Generator | None,
) -> DepthScan:
    """Cast the sensor fan from an arbitrary pose.

    Passing rng=None yields noise-free ranges; otherwise beam_count
    normal draws are consumed regardless of hit pattern so the stream
    stays aligned across runs.
    """
    bearings = sensor.bearings
    angles = pose.theta + bearings
    cos_t = np.cos(angles)
    sin_t = np.sin(angles)
    step = grid.resolution * RAY_STEP_FRACTION
    n_steps = int(round(sensor.max_range / step))
    occ = grid.occupied.view(np.uint8)
    ranges = kernels.raycast_grid(
        pose.x, pose.y, cos_t, sin_t, occ, grid.resolution, step, n_steps
    )
    for i in range(dyn_positions.shape[0]):
        fx = dyn_positions[i, 0] - pose.x
        fy = dyn_positions[i, 1] - pose.y
        b = cos_t * fx + sin_t * fy
        h2 = fx * fx + fy * fy - b * b
        disc2 = dyn_radii[i] * dyn_radii[i] - h2
        valid = disc2 >= 0.0
        t = np.where(valid, b - np.sqrt(np.where(valid, disc2, 0.0)), np.inf)
        t = np.where((t > 0.0) & (t <= sensor.max_range), t, np.inf)
        ranges = np.minimum(ranges, t)
    if rng is not None:
        draws = rng.standard_normal(sensor.beam_count)
        hit = np.isfinite(ranges)
        noisy = ranges * (1.0 + sensor.noise_sigma * draws)
        noisy = np.clip(noisy, sensor.min_range, sensor.max_range)
        ranges = np.where(hit, noisy, np.inf)
    else:
        ranges = np.where(ranges < sensor.min_range, sensor.min_range, ranges)
    return DepthScan(
        timestamp=timestamp,
        bearings=bearings,
        ranges=ranges,
        max_range=sensor.max_range,
    )


def sense_depth(state: SimState) -> DepthScan:
    """Noisy scan from the current true pose, consuming the state rng."""
    positions = obstacle_positions(state)
    radii = np.array(
        [o.radius for o in state.spec.dynamic_obstacles], dtype=np.float64
    ) if state.dynamics_enabled else np.empty(0, dtype=np.float64)
    return cast_scan(
        state.grid,
        state.sensor,
        state.true_pose,
        positions,
        radii,
        state.sim_time,
        state.rng,
    )


def drift_odometry(
    twist: Twist2D, dt: float, model: OdomNoiseModel, rng: np.random.Generator
) -> tuple[float, float, float]:
    """Robot-frame displacement a drifting wheel encoder would report.

    Always consumes exactly two normal draws.
    """
    draws = rng.standard_normal(2)
    v = twist.v * (1.0 + model.v_sigma * draws[0])
    w = twist.w * (1.0 + model.w_sigma * draws[1]) + model.heading_bias
    delta = step_kinematics(Pose2D(0.0, 0.0, 0.0), Twist2D(v, w), dt)
    return delta.x, delta.y, delta.theta


def step_world(state: SimState, twist: Twist2D) -> SimState:
    """Advance one tick: move obstacles, integrate the chair, latch collisions."""
    executed = twist.clamped(state.limits)
    if state.dynamics_enabled:
        for i, obs in enumerate(state.spec.dynamic_obstacles):
            state.dyn_phase[i] += obs.speed * TICK_DT
    state.true_pose = step_kinematics(state.true_pose, executed, TICK_DT)
    state.tick += 1
    state.last_twist = executed
    if not state.collided:
        positions = obstacle_positions(state)
        radii = np.array(
            [o.radius for o in state.spec.dynamic_obstacles], dtype=np.float64
        ) if state.dynamics_enabled else np.empty(0, dtype=np.float64)
        if check_collision(state.grid, state.true_pose, positions, radii):
            state.collided = True
    return state
