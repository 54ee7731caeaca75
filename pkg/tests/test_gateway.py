"""Gateway wire codec, service bookkeeping, and the live WebSocket session."""

from __future__ import annotations

import asyncio
import base64
import contextlib
import json

import pytest
from fastapi.testclient import TestClient

from wheelnav.arbiter import Mode
from wheelnav.costmap import COSTMAP_MAGIC
from wheelnav.gateway import (
    CommandDecodeError,
    GatewayConfig,
    SimService,
    build_app,
    decode_command,
    encode_state,
)
from wheelnav.mapping import MAP_MAGIC, encode_map, save_map
from wheelnav.pipeline import TickResult
from wheelnav.types import Pose2D, Twist2D

from conftest import BOX_WORLD


# -- codec ----------------------------------------------------------------

def test_decode_joystick_clamps_axes():
    cmd = decode_command('{"type":"joystick","fwd":3.5,"turn":-9}')
    assert cmd == {"type": "joystick", "fwd": 1.0, "turn": -1.0}


def test_decode_accepts_bytes_and_ignores_extras():
    cmd = decode_command(b'{"type":"joystick","fwd":0.5,"turn":0,"junk":1}')
    assert cmd == {"type": "joystick", "fwd": 0.5, "turn": 0.0}


@pytest.mark.parametrize(
    "text,fragment",
    [
        ('{"type":"joystick","turn":0}', "fwd"),
        ('{"type":"joystick","fwd":true,"turn":0}', "fwd"),
        ('{"type":"joystick","fwd":NaN,"turn":0}', "finite"),
        ('{"type":"set_mode","mode":"sport"}', "unknown mode"),
        ('{"type":"set_goal","label":""}', "label"),
        ('{"type":"set_goal","x":1.0}', "y"),
        ('{"type":"warp"}', "unknown command"),
        ('{"fwd":1}', "type"),
        ("[1,2,3]", "json object"),
    ],
)
def test_decode_rejects_malformed_frames(text, fragment):
    with pytest.raises(CommandDecodeError, match=fragment):
        decode_command(text)


def test_decode_bad_json_reports_offset():
    with pytest.raises(CommandDecodeError) as err:
        decode_command('{"type": !}')
    assert err.value.offset == 9


def test_decode_goal_variants_and_bare_commands():
    assert decode_command('{"type":"set_goal","label":"ward"}') == {
        "type": "set_goal", "label": "ward",
    }
    assert decode_command('{"type":"set_goal","x":1,"y":2}') == {
        "type": "set_goal", "x": 1.0, "y": 2.0,
    }
    for kind in ("start_mapping", "finish_mapping", "reset", "get_map", "get_costmap"):
        assert decode_command(json.dumps({"type": kind})) == {"type": kind}


def make_result(**overrides):
    base = dict(
        tick=4, sim_time=0.2, true_pose=Pose2D(1.0, 2.0, 0.0),
        est_pose=Pose2D(1.23456, 2.0, 0.78539), confidence="tracking",
        executed=Twist2D(0.5, 0.0), authority="system", reason="passthrough",
        mode=Mode.AUTONOMOUS, deviation=0.0, prediction=None, events=(),
        scan=None, goal=(5.0, 2.0), goal_reached=False, collided=False,
        aborted=False, distance=0.1,
    )
    base.update(overrides)
    return TickResult(**base)


def test_encode_state_fields_and_rounding():
    frame = json.loads(encode_state(make_result(), ["replanned"], [[1.0, 2.0]]))
    assert frame["type"] == "state"
    assert frame["tick"] == 4
    assert frame["pose"] == {"x": 1.235, "y": 2.0, "theta": 0.7854, "confidence": "tracking"}
    assert frame["twist"] == {"v": 0.5, "w": 0.0}
    assert frame["mode"] == "autonomous"
    assert frame["goal"] == [5.0, 2.0]
    assert frame["events"] == ["replanned"]
    assert frame["path"] == [[1.0, 2.0]]


def test_encode_state_omits_absent_goal_and_path():
    frame = json.loads(encode_state(make_result(goal=None), [], None))
    assert "goal" not in frame
    assert "path" not in frame


def test_encode_state_decimates_long_paths():
    points = [[float(i), 0.0] for i in range(1000)]
    frame = json.loads(encode_state(make_result(), [], points))
    assert len(frame["path"]) <= 257
    assert frame["path"][0] == [0.0, 0.0]
    assert frame["path"][-1] == [999.0, 0.0]


# -- service without transport ---------------------------------------------

@pytest.fixture()
def box_world_file(tmp_path):
    path = tmp_path / "box.world"
    path.write_text(BOX_WORLD)
    return path


@pytest.fixture()
def box_map_file(tmp_path, box_map):
    occ_map, goals = box_map
    path = tmp_path / "box.map"
    save_map(path, occ_map, goals)
    return path


@pytest.fixture()
def service(box_world_file, box_map_file):
    cfg = GatewayConfig(world=str(box_world_file), map_path=str(box_map_file))
    return SimService(cfg)


def frames_of(service, client_id):
    out = [json.loads(f) for f in service.clients[client_id].outbox]
    service.clients[client_id].outbox.clear()
    return out


def test_first_client_becomes_driver_then_transfer(service):
    a = service.attach(None)
    b = service.attach(None)
    assert service.driver_id == a
    hello_a = json.loads(service.hello_frame(a))
    hello_b = json.loads(service.hello_frame(b))
    assert hello_a["role"] == "driver"
    assert hello_b["role"] == "observer"
    assert hello_a["world"] == "box"
    assert hello_a["has_map"] is True
    assert hello_a["goals"]["east"] == [5.0, 2.0]
    service.detach(a)
    assert service.driver_id == b
    role_frames = [f for f in frames_of(service, b) if f["type"] == "role"]
    assert role_frames == [{"type": "role", "role": "driver"}]
    # dead-man: the vanished driver's joystick was replaced by a stop
    assert service.stack.joystick is not None
    assert service.stack.joystick.forward == 0.0


def test_observer_joystick_is_refused(service):
    driver = service.attach(None)
    observer = service.attach(None)
    service.commands.put_nowait((observer, decode_command('{"type":"joystick","fwd":1,"turn":0}')))
    service.step_once()
    errors = [f for f in frames_of(service, observer) if f["type"] == "error"]
    assert errors and errors[0]["error"] == "not driver"
    assert service.stack.joystick is None
    service.commands.put_nowait((driver, decode_command('{"type":"joystick","fwd":1,"turn":0}')))
    service.step_once()
    assert service.stack.joystick is not None


def test_set_goal_command_acks_and_arms_planner(service):
    driver = service.attach(None)
    service.commands.put_nowait((driver, {"type": "set_goal", "label": "east"}))
    service.step_once()
    acks = [f for f in frames_of(service, driver) if f["type"] == "ack"]
    assert acks == [{"type": "ack", "cmd": "set_goal", "goal": [5.0, 2.0]}]
    assert service.stack.goal == (5.0, 2.0)


def test_set_goal_rejections(service):
    driver = service.attach(None)
    for cmd, why in [
        ({"type": "set_goal", "label": "lobby"}, "no goal named"),
        ({"type": "set_goal", "x": 99.0, "y": 2.0}, "goal outside map"),
        ({"type": "set_goal", "x": 2.9, "y": 0.6}, "goal unreachable"),
    ]:
        service.commands.put_nowait((driver, cmd))
    service.step_once()
    errors = [f for f in frames_of(service, driver) if f["type"] == "error"]
    assert [e["cmd"] for e in errors] == ["set_goal"] * 3
    for e, why in zip(errors, ["no goal named", "goal outside map", "goal unreachable"]):
        assert why in e["error"]


def test_set_mode_ack(service):
    driver = service.attach(None)
    service.commands.put_nowait((driver, {"type": "set_mode", "mode": "manual"}))
    service.step_once()
    acks = [f for f in frames_of(service, driver) if f["type"] == "ack"]
    assert acks == [{"type": "ack", "cmd": "set_mode", "mode": "manual"}]
    assert service.stack.mode is Mode.MANUAL


def test_map_frames_round_trip_base64(service):
    driver = service.attach(None)
    service.commands.put_nowait((driver, {"type": "get_map"}))
    service.commands.put_nowait((driver, {"type": "get_costmap"}))
    service.step_once()
    frames = frames_of(service, driver)
    map_frame = next(f for f in frames if f["type"] == "map")
    blob = base64.b64decode(map_frame["data"])
    assert blob == encode_map(service.stack.map_grid)
    cost_frame = next(f for f in frames if f["type"] == "costmap")
    assert base64.b64decode(cost_frame["data"]).startswith(COSTMAP_MAGIC)


def test_reset_rebuilds_the_stack(service):
    driver = service.attach(None)
    service.commands.put_nowait((driver, {"type": "set_goal", "label": "east"}))
    service.step_once()
    assert service.stack.goal is not None
    old = service.stack
    service.commands.put_nowait((driver, {"type": "reset"}))
    service.step_once()
    assert service.stack is not old
    assert service.stack.goal is None
    frames = frames_of(service, driver)
    assert any(f == {"type": "ack", "cmd": "reset"} for f in frames)


def test_state_frames_every_second_tick(service):
    client = service.attach(None)
    for _ in range(8):
        service.step_once()
    states = [f for f in frames_of(service, client) if f["type"] == "state"]
    assert len(states) == 4
    ticks = [f["tick"] for f in states]
    assert ticks == sorted(ticks)
    assert all(t % 2 == 0 for t in ticks)


def test_record_dir_captures_tick_log(box_world_file, box_map_file, tmp_path):
    rec = tmp_path / "rec"
    cfg = GatewayConfig(
        world=str(box_world_file), map_path=str(box_map_file), record_dir=str(rec)
    )
    service = SimService(cfg)
    for _ in range(5):
        service.step_once()
    asyncio.run(service.stop())
    lines = (rec / "ticks.jsonl").read_text().splitlines()
    assert len(lines) == 5
    assert json.loads(lines[0])["tick"] == 0


def test_unknown_mode_in_config_rejected(box_world_file):
    with pytest.raises(ValueError, match="unknown mode"):
        SimService(GatewayConfig(world=str(box_world_file), mode="sport"))


# -- live app over HTTP and WebSocket ---------------------------------------

def recv_type(ws, wanted, limit=400):
    for _ in range(limit):
        frame = json.loads(ws.receive_text())
        if frame["type"] in wanted:
            return frame
    raise AssertionError(f"no {wanted} frame within {limit} frames")


def test_http_endpoints_404_without_map(box_world_file):
    app = build_app(GatewayConfig(world=str(box_world_file), speed=40.0))
    with TestClient(app) as http:
        assert http.get("/map").status_code == 404
        assert http.get("/costmap").status_code == 404


def test_live_session_over_websocket(box_world_file, box_map_file):
    app = build_app(
        GatewayConfig(world=str(box_world_file), map_path=str(box_map_file), speed=40.0)
    )
    with TestClient(app) as http:
        map_bytes = http.get("/map")
        assert map_bytes.status_code == 200
        assert map_bytes.content.startswith(MAP_MAGIC)
        cost_bytes = http.get("/costmap")
        assert cost_bytes.status_code == 200
        assert cost_bytes.content.startswith(COSTMAP_MAGIC)

        driver_cm = http.websocket_connect("/ws")
        driver = driver_cm.__enter__()
        try:
            hello = json.loads(driver.receive_text())
            assert hello["type"] == "hello"
            assert hello["role"] == "driver"
            assert hello["has_map"] is True

            with http.websocket_connect("/ws") as observer:
                obs_hello = json.loads(observer.receive_text())
                assert obs_hello["role"] == "observer"

                observer.send_text('{"type":"joystick","fwd":1,"turn":0}')
                err = recv_type(observer, {"error"})
                assert err["error"] == "not driver"

                driver.send_text('{"type":"set_goal","label":"east"}')
                ack = recv_type(driver, {"ack"})
                assert ack["cmd"] == "set_goal"
                assert ack["goal"] == [5.0, 2.0]

                state = recv_type(driver, {"state"})
                assert state["goal"] == [5.0, 2.0]
                assert state["mode"] == "autonomous"

                driver.send_text("not json at all")
                bad = recv_type(driver, {"error"})
                assert "bad json" in bad["error"]

                # driver leaves: the observer inherits the wheel
                driver_cm.__exit__(None, None, None)
                role = recv_type(observer, {"role"})
                assert role == {"type": "role", "role": "driver"}
        finally:
            with contextlib.suppress(Exception):
                driver_cm.__exit__(None, None, None)
