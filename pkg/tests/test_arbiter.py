"""Shared-control arbitration: joystick scaling, deviation, takeover logic."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wheelnav.arbiter import (
    AUTHORITY_SYSTEM,
    AUTHORITY_USER,
    REASON_COLLISION,
    REASON_DEVIATION,
    REASON_NO_INPUT,
    REASON_PASSTHROUGH,
    REASON_USER_STOP,
    ArbiterDecision,
    JoystickCommand,
    Mode,
    SafetyParams,
    arbitrate,
    cross_track_deviation,
    predict_collision,
    scale_joystick,
)
from wheelnav.costmap import build_static_costmap
from wheelnav.mapping import OCCUPIED_VALUE, OccupancyGrid
from wheelnav.planner import plan_global
from wheelnav.types import Pose2D, Twist2D, VelocityLimits

LIMITS = VelocityLimits()
PARAMS = SafetyParams()


def test_scale_joystick_maps_axes_onto_limits():
    cmd = JoystickCommand(forward=0.5, turn=-1.0, timestamp=10.0)
    twist = scale_joystick(cmd, LIMITS, now=10.1)
    assert twist == Twist2D(0.5 * LIMITS.v_max, -LIMITS.w_max)


def test_scale_joystick_clamps_out_of_range_axes():
    cmd = JoystickCommand(forward=3.0, turn=-7.0, timestamp=0.0)
    twist = scale_joystick(cmd, LIMITS, now=0.0)
    assert twist == Twist2D(LIMITS.v_max, -LIMITS.w_max)


def test_scale_joystick_dead_man_cutoff():
    cmd = JoystickCommand(forward=1.0, turn=0.0, timestamp=0.0)
    assert scale_joystick(cmd, LIMITS, now=0.5) == Twist2D(LIMITS.v_max, 0.0)
    assert scale_joystick(cmd, LIMITS, now=0.51) == Twist2D(0.0, 0.0)
    assert scale_joystick(None, LIMITS, now=0.0) == Twist2D(0.0, 0.0)


def test_safety_params_reject_inverted_hysteresis():
    with pytest.raises(ValueError):
        SafetyParams(deviation_threshold=0.3, deviation_release=0.3)


def open_costmap(size: int = 100):
    return build_static_costmap(
        OccupancyGrid(0.05, np.zeros((size, size), dtype=np.uint8))
    )


def test_cross_track_deviation_point_to_polyline():
    cm = open_costmap()
    path = plan_global(cm, (1.0, 2.0), (4.0, 2.0))
    on_path = cross_track_deviation(Pose2D(2.0, 2.025, 0.0), path)
    assert on_path == pytest.approx(0.0, abs=1e-9)
    aside = cross_track_deviation(Pose2D(2.0, 2.525, 0.0), path)
    assert aside == pytest.approx(0.5, abs=1e-9)
    # ahead of the final waypoint the nearest point is that endpoint
    past = cross_track_deviation(Pose2D(5.0, 2.025, 0.0), path)
    end = path.waypoints[-1]
    assert past == pytest.approx(math.hypot(5.0 - end[0], 2.025 - end[1]), abs=1e-9)
    assert cross_track_deviation(Pose2D(0.0, 0.0, 0.0), None) == 0.0


def test_predict_collision_times_the_wall():
    cells = np.zeros((100, 100), dtype=np.uint8)
    cells[:, 60] = OCCUPIED_VALUE  # wall at x = 3.0
    cm = build_static_costmap(OccupancyGrid(0.05, cells))
    pose = Pose2D(2.2, 2.5, 0.0)
    hit = predict_collision(pose, Twist2D(0.5, 0.0), cm)
    # inscribed band: cells whose center is strictly within 0.35 m of the
    # wall cell centers at x = 3.025, i.e. columns from x = 2.7 onward
    assert hit is not None
    assert hit == pytest.approx((2.7 - 2.2) / 0.5, abs=0.1)
    assert predict_collision(pose, Twist2D(0.0, 0.0), cm) is None
    # heading away stays clear over the whole horizon
    away = predict_collision(Pose2D(2.2, 2.5, math.pi), Twist2D(0.5, 0.0), cm)
    assert away is None


def test_predict_collision_off_map_counts_as_contact():
    cm = open_costmap(40)  # 2 m square
    hit = predict_collision(Pose2D(1.9, 1.0, 0.0), Twist2D(0.5, 0.0), cm)
    assert hit is not None
    assert hit <= 0.3


def test_manual_mode_passes_user_through():
    user = Twist2D(0.3, 0.1)
    decision, latch = arbitrate(
        Mode.MANUAL, user, Twist2D(0.5, 0.0), 0.0, None, False, PARAMS, LIMITS
    )
    assert decision == ArbiterDecision(user, AUTHORITY_USER, REASON_PASSTHROUGH)
    assert latch is False
    idle, _ = arbitrate(
        Mode.MANUAL, Twist2D(0.0, 0.0), Twist2D(0.5, 0.0), 0.0, None, False, PARAMS, LIMITS
    )
    assert idle.reason == REASON_NO_INPUT
    assert idle.authority == AUTHORITY_USER


def test_manual_mode_collision_override_stops():
    decision, latch = arbitrate(
        Mode.MANUAL, Twist2D(0.5, 0.0), Twist2D(0.4, 0.0), 0.0, 0.4, False, PARAMS, LIMITS
    )
    assert decision.twist == Twist2D(0.0, 0.0)  # stop, never the planner twist
    assert decision.authority == AUTHORITY_SYSTEM
    assert decision.reason == REASON_COLLISION
    assert latch is False


def test_autonomous_mode_follows_planner_and_stops_on_stick():
    planner = Twist2D(0.4, 0.2)
    decision, _ = arbitrate(
        Mode.AUTONOMOUS, Twist2D(0.0, 0.0), planner, 0.0, None, False, PARAMS, LIMITS
    )
    assert decision == ArbiterDecision(planner, AUTHORITY_SYSTEM, REASON_PASSTHROUGH)
    stop, _ = arbitrate(
        Mode.AUTONOMOUS, Twist2D(0.1, 0.0), planner, 0.0, None, False, PARAMS, LIMITS
    )
    assert stop.twist == Twist2D(0.0, 0.0)
    assert stop.reason == REASON_USER_STOP


def test_semi_mode_deviation_takeover_and_release():
    user = Twist2D(0.3, 0.0)
    planner = Twist2D(0.2, -0.1)
    below, latch = arbitrate(
        Mode.SEMI_AUTONOMOUS, user, planner, 0.4, None, False, PARAMS, LIMITS
    )
    assert below.authority == AUTHORITY_USER
    assert latch is False
    over, latch = arbitrate(
        Mode.SEMI_AUTONOMOUS, user, planner, 0.6, None, False, PARAMS, LIMITS
    )
    assert over == ArbiterDecision(planner, AUTHORITY_SYSTEM, REASON_DEVIATION)
    assert latch is True
    # latched: still system even though deviation dropped under the threshold
    held, latch = arbitrate(
        Mode.SEMI_AUTONOMOUS, user, planner, 0.3, None, True, PARAMS, LIMITS
    )
    assert held.authority == AUTHORITY_SYSTEM
    assert latch is True
    freed, latch = arbitrate(
        Mode.SEMI_AUTONOMOUS, user, planner, 0.2, None, True, PARAMS, LIMITS
    )
    assert freed.authority == AUTHORITY_USER
    assert latch is False


def test_semi_mode_collision_override_keeps_latch_state():
    decision, latch = arbitrate(
        Mode.SEMI_AUTONOMOUS, Twist2D(0.5, 0.0), Twist2D(0.1, 0.0), 0.6, 0.2, False,
        PARAMS, LIMITS,
    )
    assert decision.reason == REASON_COLLISION
    assert decision.authority == AUTHORITY_SYSTEM
    assert latch is True


def test_deviation_ramp_produces_exactly_two_transitions():
    up = [k * 0.05 for k in range(15)]
    down = list(reversed(up))[1:]
    latch = False
    authorities = []
    for dev in up + down:
        decision, latch = arbitrate(
            Mode.SEMI_AUTONOMOUS, Twist2D(0.3, 0.0), Twist2D(0.2, 0.0), dev, None,
            latch, PARAMS, LIMITS,
        )
        authorities.append(decision.authority)
    flips = sum(1 for a, b in zip(authorities, authorities[1:]) if a != b)
    assert flips == 2
    assert authorities[0] == AUTHORITY_USER
    assert authorities[-1] == AUTHORITY_USER


def expected_user_authority(
    mode: Mode, deviation: float, prediction: float | None, latched: bool,
    params: SafetyParams,
) -> bool:
    """User drives iff not autonomous, no predicted contact, and (in semi
    mode) the deviation sits below whichever threshold the latch makes
    active."""
    if mode is Mode.AUTONOMOUS or prediction is not None:
        return False
    if mode is Mode.MANUAL:
        return True
    active = params.deviation_release if latched else params.deviation_threshold
    return deviation < active


@settings(max_examples=400, deadline=None)
@given(
    mode=st.sampled_from(list(Mode)),
    user_v=st.floats(-1.5, 1.5),
    user_w=st.floats(-4.0, 4.0),
    planner_v=st.floats(-1.5, 1.5),
    planner_w=st.floats(-4.0, 4.0),
    deviation=st.floats(0.0, 1.0),
    prediction=st.one_of(st.none(), st.floats(0.05, 1.5)),
    latched=st.booleans(),
)
def test_arbitrate_properties(
    mode, user_v, user_w, planner_v, planner_w, deviation, prediction, latched
):
    user = Twist2D(user_v, user_w)
    planner = Twist2D(planner_v, planner_w)
    decision, new_latch = arbitrate(
        mode, user, planner, deviation, prediction, latched, PARAMS, LIMITS
    )
    want_user = expected_user_authority(mode, deviation, prediction, latched, PARAMS)
    assert decision.authority == (AUTHORITY_USER if want_user else AUTHORITY_SYSTEM)
    assert abs(decision.twist.v) <= LIMITS.v_max
    assert abs(decision.twist.w) <= LIMITS.w_max
    if decision.authority == AUTHORITY_USER:
        assert decision.twist == user.clamped(LIMITS)
    if mode is Mode.MANUAL:
        # manual never emits the planner command: passthrough or full stop
        assert decision.twist in (user.clamped(LIMITS), Twist2D(0.0, 0.0))
        assert new_latch is False
    if mode is Mode.AUTONOMOUS:
        assert new_latch is False
    if mode is Mode.SEMI_AUTONOMOUS:
        active = PARAMS.deviation_release if latched else PARAMS.deviation_threshold
        assert new_latch == (deviation >= active)
