"""Shared-control navigation stack for a differential-drive wheelchair.

Mapping, costmaps, global planning, command arbitration and recovery
behaviors, all running against a deterministic fixed-timestep 2D
simulator, with a trial harness and a WebSocket gateway for the
operator cockpit.
"""

__version__ = "0.1.0"

from wheelnav.types import Pose2D, Twist2D, VelocityLimits

__all__ = ["Pose2D", "Twist2D", "VelocityLimits", "__version__"]
