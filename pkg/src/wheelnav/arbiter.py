"""Shared-control arbitration between the operator and the planner.

Three modes: manual passes the joystick through unless a collision is
predicted; semi_autonomous lets the operator drive but hands the wheels
to the planner while the chair strays from the plan or is about to hit
something; autonomous follows the planner and treats any stick input as
an emergency stop. Deviation handover uses hysteresis so control does not
chatter at the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from wheelnav.costmap import INSCRIBED, Costmap, cost_at
from wheelnav.planner import Path
from wheelnav.sim import TICK_DT, step_kinematics
from wheelnav.types import Pose2D, Twist2D, VelocityLimits


class Mode(str, Enum):
    MANUAL = "manual"
    SEMI_AUTONOMOUS = "semi_autonomous"
    AUTONOMOUS = "autonomous"


AUTHORITY_USER = "user"
AUTHORITY_SYSTEM = "system"

REASON_PASSTHROUGH = "passthrough"
REASON_NO_INPUT = "no_input"
REASON_DEVIATION = "deviation_correction"
REASON_COLLISION = "collision_override"
REASON_USER_STOP = "user_stop"


@dataclass(frozen=True)
class JoystickCommand:
    """Raw stick state: axes in [-1, 1] plus the time it was sampled."""

    forward: float
    turn: float
    timestamp: float


@dataclass(frozen=True)
class SafetyParams:
    deviation_threshold: float = 0.5  # m, hand control to the system
    deviation_release: float = 0.25  # m, hand it back
    predict_horizon: float = 1.5  # s of forward simulation
    predict_margin: int = INSCRIBED  # cost that counts as contact
    deadman_timeout: float = 0.5  # s without joystick input reads as release

    def __post_init__(self) -> None:
        if self.deviation_release >= self.deviation_threshold:
            raise ValueError("release must sit below the takeover threshold")


@dataclass(frozen=True)
class ArbiterDecision:
    twist: Twist2D
    authority: str
    reason: str


def scale_joystick(
    cmd: JoystickCommand | None, limits: VelocityLimits, now: float, deadman: float = 0.5
) -> Twist2D:
    """Map stick axes onto the velocity envelope; stale input reads zero."""
    if cmd is None or now - cmd.timestamp > deadman:
        return Twist2D(0.0, 0.0)
    fwd = max(-1.0, min(1.0, cmd.forward))
    turn = max(-1.0, min(1.0, cmd.turn))
    return Twist2D(fwd * limits.v_max, turn * limits.w_max)


def cross_track_deviation(pose: Pose2D, path: Path | None) -> float:
    """Distance from the pose to the nearest point of the planned polyline."""
    if path is None or len(path) == 0:
        return 0.0
    wp = path.waypoints
    if wp.shape[0] == 1:
        return float(math.hypot(wp[0, 0] - pose.x, wp[0, 1] - pose.y))
    a = wp[:-1]
    b = wp[1:]
    ab = b - a
    len2 = (ab**2).sum(axis=1)
    p = np.array([pose.x, pose.y])
    ap = p[None, :] - a
    t = np.where(len2 > 0.0, (ap * ab).sum(axis=1) / np.where(len2 > 0.0, len2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d2 = ((p[None, :] - proj) ** 2).sum(axis=1)
    return float(math.sqrt(d2.min()))


def predict_collision(
    pose: Pose2D,
    twist: Twist2D,
    cm: Costmap,
    params: SafetyParams | None = None,
    dt: float = TICK_DT,
) -> float | None:
    """Earliest time within the horizon the commanded motion reaches contact.

    Rolls the pose forward under the constant twist and reports the first
    step whose cell cost meets the margin; the inscribed inflation makes
    the center cell stand in for the whole footprint. A zero twist never
    collides, and leaving the map counts as contact.
    """
    params = params or SafetyParams()
    if twist.is_zero():
        return None
    steps = int(round(params.predict_horizon / dt))
    p = pose
    for k in range(1, steps + 1):
        p = step_kinematics(p, twist, dt)
        try:
            c = cost_at(cm, p.x, p.y)
        except ValueError:
            return k * dt
        if c >= params.predict_margin:
            return k * dt
    return None


def arbitrate(
    mode: Mode,
    user_twist: Twist2D,
    planner_twist: Twist2D,
    deviation: float,
    prediction: float | None,
    latched: bool,
    params: SafetyParams,
    limits: VelocityLimits,
) -> tuple[ArbiterDecision, bool]:
    """Pick whose command drives the wheels this tick.

    Returns the decision and the updated deviation latch. The latch arms
    at deviation_threshold and releases only below deviation_release, so
    while it is set the active threshold is the release value.
    """
    zero = Twist2D(0.0, 0.0)
    if mode is Mode.MANUAL:
        if prediction is not None:
            return ArbiterDecision(zero, AUTHORITY_SYSTEM, REASON_COLLISION), False
        reason = REASON_NO_INPUT if user_twist.is_zero() else REASON_PASSTHROUGH
        return ArbiterDecision(user_twist.clamped(limits), AUTHORITY_USER, reason), False

    if mode is Mode.AUTONOMOUS:
        if not user_twist.is_zero():
            return ArbiterDecision(zero, AUTHORITY_SYSTEM, REASON_USER_STOP), False
        return (
            ArbiterDecision(planner_twist.clamped(limits), AUTHORITY_SYSTEM, REASON_PASSTHROUGH),
            False,
        )

    active = params.deviation_release if latched else params.deviation_threshold
    now_latched = deviation >= active
    if prediction is not None:
        return (
            ArbiterDecision(planner_twist.clamped(limits), AUTHORITY_SYSTEM, REASON_COLLISION),
            now_latched,
        )
    if now_latched:
        return (
            ArbiterDecision(planner_twist.clamped(limits), AUTHORITY_SYSTEM, REASON_DEVIATION),
            True,
        )
    reason = REASON_NO_INPUT if user_twist.is_zero() else REASON_PASSTHROUGH
    return ArbiterDecision(user_twist.clamped(limits), AUTHORITY_USER, reason), False
