"""Core pose and command types shared across the stack."""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    return theta - TWO_PI * math.ceil((theta - math.pi) / TWO_PI)


@dataclass(frozen=True)
class Pose2D:
    """Planar pose. theta is kept normalized to (-pi, pi]."""

    x: float = 0.0  # m
    y: float = 0.0  # m
    theta: float = 0.0  # rad

    def normalized(self) -> Pose2D:
        return Pose2D(self.x, self.y, wrap_angle(self.theta))

    def compose(self, dx: float, dy: float, dtheta: float) -> Pose2D:
        """Apply a robot-frame delta (dx forward, dy left) to this pose."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(
            self.x + c * dx - s * dy,
            self.y + s * dx + c * dy,
            wrap_angle(self.theta + dtheta),
        )

    def distance_to(self, other: Pose2D) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Twist2D:
    """Velocity command: linear v (m/s) and angular w (rad/s)."""

    v: float = 0.0
    w: float = 0.0

    def clamped(self, limits: VelocityLimits) -> Twist2D:
        return Twist2D(
            min(max(self.v, -limits.v_max), limits.v_max),
            min(max(self.w, -limits.w_max), limits.w_max),
        )

    def is_zero(self, eps: float = 1e-12) -> bool:
        return abs(self.v) <= eps and abs(self.w) <= eps


ZERO_TWIST = Twist2D(0.0, 0.0)


@dataclass(frozen=True)
class VelocityLimits:
    """Chair velocity envelope; commands are clamped before integration."""

    v_max: float = 0.5  # m/s
    w_max: float = 1.5  # rad/s

    def __post_init__(self) -> None:
        if self.v_max <= 0 or self.w_max <= 0:
            raise ValueError("velocity limits must be positive")
