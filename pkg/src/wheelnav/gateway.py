"""Network gateway hosting the simulation loop as a service.

One asyncio task owns the navigation stack and advances it on an
absolute-deadline schedule (drift-free pacing against the monotonic
clock). Clients connect over a WebSocket, receive JSON state frames at
half the control rate, and submit commands that are drained at the next
tick boundary, so every command lands tick-atomically. Exactly one
client at a time holds the driver role; joystick frames from anyone
else are rejected. Slow readers never stall the loop: each client has a
small outbox that drops the oldest frame on overflow.
"""

from __future__ import annotations

import asyncio
import base64
import contextlib
import json
import math
from dataclasses import dataclass, field
from collections import deque
from pathlib import Path as FsPath
from typing import Any, AsyncIterator

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response

from wheelnav.arbiter import Mode
from wheelnav.costmap import LETHAL, UNKNOWN, encode_costmap
from wheelnav.mapping import encode_map, load_map, save_map
from wheelnav.pipeline import NavStack, TickResult, tick_json_line
from wheelnav.sim import TICK_DT
from wheelnav.world import resolve_world

STATE_EVERY_TICKS = 2  # 10 Hz state stream against the 20 Hz loop
PATH_POINT_LIMIT = 256
OUTBOX_LIMIT = 64  # frames buffered per client before dropping oldest
COMMAND_QUEUE_LIMIT = 256

MODES = {m.value: m for m in Mode}


@dataclass(frozen=True)
class GatewayConfig:
    world: str
    map_path: str | None = None
    mode: str = Mode.AUTONOMOUS.value
    port: int = 8732
    seed: int = 0
    headless: bool = False
    speed: float = 1.0
    record_dir: str | None = None


class CommandDecodeError(Exception):
    """Malformed inbound frame; carries a reason and a byte offset."""

    def __init__(self, reason: str, offset: int = 0) -> None:
        super().__init__(reason)
        self.reason = reason
        self.offset = offset


# -- wire codec ----------------------------------------------------------

def _require_number(cmd: dict, key: str) -> float:
    value = cmd.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise CommandDecodeError(f"field {key!r} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise CommandDecodeError(f"field {key!r} must be finite")
    return value


def decode_command(text: str | bytes) -> dict[str, Any]:
    """Parse one inbound frame into a normalized command dict.

    Unknown fields are ignored for forward compatibility; unknown types
    and malformed values raise CommandDecodeError instead of crashing
    the session.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CommandDecodeError(f"bad json: {exc.msg}", exc.pos) from exc
    if not isinstance(raw, dict):
        raise CommandDecodeError("frame must be a json object")
    kind = raw.get("type")
    if not isinstance(kind, str):
        raise CommandDecodeError("missing 'type' field")

    if kind == "joystick":
        fwd = max(-1.0, min(1.0, _require_number(raw, "fwd")))
        turn = max(-1.0, min(1.0, _require_number(raw, "turn")))
        return {"type": kind, "fwd": fwd, "turn": turn}
    if kind == "set_mode":
        mode = raw.get("mode")
        if mode not in MODES:
            raise CommandDecodeError(f"unknown mode {mode!r}")
        return {"type": kind, "mode": mode}
    if kind == "set_goal":
        if "label" in raw:
            label = raw.get("label")
            if not isinstance(label, str) or not label:
                raise CommandDecodeError("goal label must be a non-empty string")
            return {"type": kind, "label": label}
        return {
            "type": kind,
            "x": _require_number(raw, "x"),
            "y": _require_number(raw, "y"),
        }
    if kind in ("start_mapping", "finish_mapping", "reset", "get_map", "get_costmap"):
        return {"type": kind}
    raise CommandDecodeError(f"unknown command type {kind!r}")


def _decimate(points: list[list[float]]) -> list[list[float]]:
    if len(points) > PATH_POINT_LIMIT:
        step = -(-len(points) // PATH_POINT_LIMIT)
        points = points[::step] + [points[-1]]
    return [[round(x, 3), round(y, 3)] for x, y in points]


def encode_state(
    result: TickResult, events: list[str], path_points: list[list[float]] | None
) -> str:
    """One state frame: the estimate-side view of the latest tick."""
    frame: dict[str, Any] = {
        "type": "state",
        "tick": result.tick,
        "sim_time": round(result.sim_time, 3),
        "pose": {
            "x": round(result.est_pose.x, 3),
            "y": round(result.est_pose.y, 3),
            "theta": round(result.est_pose.theta, 4),
            "confidence": result.confidence,
        },
        "twist": {"v": round(result.executed.v, 3), "w": round(result.executed.w, 3)},
        "mode": result.mode.value,
        "authority": result.authority,
        "reason": result.reason,
        "goal_reached": result.goal_reached,
        "events": events,
    }
    if result.goal is not None:
        frame["goal"] = [round(result.goal[0], 3), round(result.goal[1], 3)]
    if path_points is not None:
        frame["path"] = _decimate(path_points)
    return json.dumps(frame, separators=(",", ":"))


# -- service -------------------------------------------------------------

@dataclass
class _Client:
    ws: WebSocket
    outbox: deque[str] = field(default_factory=lambda: deque(maxlen=OUTBOX_LIMIT))
    kick: asyncio.Event = field(default_factory=asyncio.Event)

    def push(self, frame: str) -> None:
        self.outbox.append(frame)  # deque drops the oldest when full
        self.kick.set()


class SimService:
    """The simulation loop plus its client bookkeeping."""

    def __init__(self, config: GatewayConfig) -> None:
        self.config = config
        self.spec = resolve_world(config.world)
        self._occ = None
        self._goals: dict[str, tuple[float, float]] = {}
        if config.map_path:
            self._occ, self._goals = load_map(config.map_path)
        if config.mode not in MODES:
            raise ValueError(f"unknown mode {config.mode!r}")
        self.stack = self._make_stack()
        self.clients: dict[int, _Client] = {}
        self._next_client_id = 1
        self._driver_id: int | None = None
        self.commands: asyncio.Queue[tuple[int, dict[str, Any]]] = asyncio.Queue(
            maxsize=COMMAND_QUEUE_LIMIT
        )
        self._pending_mode: Mode | None = None
        self._pending_events: list[str] = []
        self._was_goal_reached = False
        self._record_file = None
        if config.record_dir:
            rec_dir = FsPath(config.record_dir)
            rec_dir.mkdir(parents=True, exist_ok=True)
            self._record_file = (rec_dir / "ticks.jsonl").open("w")
        self._task: asyncio.Task | None = None

    def _make_stack(self) -> NavStack:
        return NavStack(
            self.spec,
            occ_map=self._occ,
            goals=self._goals or None,
            mode=MODES[self.config.mode],
            seed=self.config.seed,
        )

    # -- roles ---------------------------------------------------------

    @property
    def driver_id(self) -> int | None:
        return self._driver_id

    def attach(self, ws: WebSocket) -> int:
        client_id = self._next_client_id
        self._next_client_id += 1
        self.clients[client_id] = _Client(ws)
        if self._driver_id is None:
            self._driver_id = client_id
        return client_id

    def detach(self, client_id: int) -> None:
        self.clients.pop(client_id, None)
        if client_id == self._driver_id:
            # dead-man: a vanished driver must not leave a live command
            self.stack.submit_joystick(0.0, 0.0, self.stack.sim.sim_time)
            self._driver_id = min(self.clients) if self.clients else None
            if self._driver_id is not None:
                self.clients[self._driver_id].push(
                    json.dumps({"type": "role", "role": "driver"})
                )

    def hello_frame(self, client_id: int) -> str:
        return json.dumps(
            {
                "type": "hello",
                "role": "driver" if client_id == self._driver_id else "observer",
                "world": self.spec.name,
                "resolution": self.spec.resolution,
                "size": [self.spec.width, self.spec.height],
                "goals": {k: list(v) for k, v in self.stack.goals.items()},
                "mode": self.stack.mode.value,
                "has_map": self.stack.cm is not None,
                "tick": self.stack.sim.tick,
            }
        )

    # -- command application (inside the loop, tick-atomic) -------------

    def _reply(self, client_id: int, frame: dict[str, Any]) -> None:
        client = self.clients.get(client_id)
        if client is not None:
            client.push(json.dumps(frame, separators=(",", ":")))

    def _ack(self, client_id: int, cmd: str, **extra: Any) -> None:
        self._reply(client_id, {"type": "ack", "cmd": cmd, **extra})

    def _refuse(self, client_id: int, cmd: str, error: str) -> None:
        self._reply(client_id, {"type": "error", "cmd": cmd, "error": error})

    def _goal_cost(self, x: float, y: float) -> int | None:
        cm = self.stack.cm
        if cm is None:
            return None
        col = int(x / cm.resolution)
        row = int(y / cm.resolution)
        if not (0 <= row < cm.height and 0 <= col < cm.width):
            return None
        return int(cm.composed()[row, col])

    def _apply_command(self, client_id: int, cmd: dict[str, Any]) -> None:
        kind = cmd["type"]
        if kind == "joystick":
            if client_id != self._driver_id:
                self._refuse(client_id, kind, "not driver")
                return
            self.stack.submit_joystick(cmd["fwd"], cmd["turn"], self.stack.sim.sim_time)
            return  # high-rate stream, no ack chatter
        if kind == "set_mode":
            mode = MODES[cmd["mode"]]
            if self.stack.recovery.stage not in ("none", "aborted"):
                # a recovery sequence owns the base until it resolves
                self._pending_mode = mode
                self._ack(client_id, kind, queued=True)
                return
            self.stack.set_mode(mode)
            self._ack(client_id, kind, mode=mode.value)
            return
        if kind == "set_goal":
            if self.stack.cm is None:
                self._refuse(client_id, kind, "no map loaded")
                return
            try:
                if "label" in cmd:
                    goal_xy = self.stack.set_goal(cmd["label"])
                else:
                    cost = self._goal_cost(cmd["x"], cmd["y"])
                    if cost is None:
                        self._refuse(client_id, kind, "goal outside map")
                        return
                    if cost >= LETHAL or cost == UNKNOWN:
                        self._refuse(client_id, kind, "goal unreachable")
                        return
                    goal_xy = self.stack.set_goal((cmd["x"], cmd["y"]))
            except KeyError:
                self._refuse(client_id, kind, f"no goal named {cmd['label']!r}")
                return
            self._ack(client_id, kind, goal=[goal_xy[0], goal_xy[1]])
            return
        if kind == "start_mapping":
            self.stack.start_mapping()
            self._pending_events.append("mapping_started")
            self._ack(client_id, kind)
            return
        if kind == "finish_mapping":
            if self.stack.session is None:
                self._refuse(client_id, kind, "not mapping")
                return
            outcome = self.stack.finish_mapping()
            out_path = self.config.map_path or f"{self.spec.name}.map"
            assert self.stack.map_grid is not None
            save_map(out_path, self.stack.map_grid, self.stack.goals)
            if outcome["loop_closed"]:
                self._pending_events.append("loop_closed")
            self._pending_events.append("map_saved")
            self._ack(client_id, kind, saved=out_path, **outcome)
            return
        if kind == "reset":
            self.stack = self._make_stack()
            self._pending_mode = None
            self._was_goal_reached = False
            self._pending_events.append("reset")
            self._ack(client_id, kind)
            return
        if kind == "get_map":
            if self.stack.map_grid is None:
                self._refuse(client_id, kind, "no map loaded")
                return
            blob = base64.b64encode(encode_map(self.stack.map_grid)).decode("ascii")
            self._reply(client_id, {"type": "map", "encoding": "base64", "data": blob})
            return
        if kind == "get_costmap":
            if self.stack.cm is None:
                self._refuse(client_id, kind, "no map loaded")
                return
            blob = base64.b64encode(encode_costmap(self.stack.cm)).decode("ascii")
            self._reply(
                client_id, {"type": "costmap", "encoding": "base64", "data": blob}
            )
            return

    # -- the loop --------------------------------------------------------

    def step_once(self) -> TickResult:
        """Drain queued commands and advance exactly one tick."""
        while True:
            try:
                client_id, cmd = self.commands.get_nowait()
            except asyncio.QueueEmpty:
                break
            self._apply_command(client_id, cmd)
        if (
            self._pending_mode is not None
            and self.stack.recovery.stage in ("none", "aborted")
        ):
            self.stack.set_mode(self._pending_mode)
            self._pending_events.append(f"mode:{self._pending_mode.value}")
            self._pending_mode = None

        result = self.stack.tick()

        self._pending_events.extend(result.events)
        if result.goal_reached and not self._was_goal_reached:
            self._pending_events.append("goal_reached")
        self._was_goal_reached = result.goal_reached
        if self._record_file is not None:
            self._record_file.write(tick_json_line(result) + "\n")

        divisor = 1 if self.config.headless else STATE_EVERY_TICKS
        if result.tick % divisor == 0:
            path = self.stack.path
            points = path.waypoints.tolist() if path is not None else None
            frame = encode_state(result, self._pending_events, points)
            self._pending_events = []
            for client in self.clients.values():
                client.push(frame)
        return result

    async def run(self) -> None:
        loop = asyncio.get_running_loop()
        deadline = loop.time()
        interval = TICK_DT / self.config.speed if self.config.speed > 0 else 0.0
        while True:
            if interval > 0.0:
                deadline += interval
                delay = deadline - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                elif delay < -1.0:
                    deadline = loop.time()  # resync after a long stall
            else:
                await asyncio.sleep(0)
            self.step_once()

    def start(self) -> None:
        self._task = asyncio.get_running_loop().create_task(self.run())

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._task
            self._task = None
        if self._record_file is not None:
            self._record_file.close()
            self._record_file = None


# -- transport -----------------------------------------------------------

async def _writer(client: _Client) -> None:
    while True:
        await client.kick.wait()
        client.kick.clear()
        while client.outbox:
            await client.ws.send_text(client.outbox.popleft())


def build_app(config: GatewayConfig) -> FastAPI:
    service = SimService(config)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI) -> AsyncIterator[None]:
        service.start()
        try:
            yield
        finally:
            await service.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.service = service

    @app.get("/map")
    def get_map() -> Response:
        if service.stack.map_grid is None:
            return JSONResponse({"error": "no map loaded"}, status_code=404)
        return Response(
            encode_map(service.stack.map_grid), media_type="application/octet-stream"
        )

    @app.get("/costmap")
    def get_costmap() -> Response:
        if service.stack.cm is None:
            return JSONResponse({"error": "no map loaded"}, status_code=404)
        return Response(
            encode_costmap(service.stack.cm), media_type="application/octet-stream"
        )

    @app.websocket("/ws")
    async def ws_session(ws: WebSocket) -> None:
        await ws.accept()
        client_id = service.attach(ws)
        client = service.clients[client_id]
        await ws.send_text(service.hello_frame(client_id))
        writer = asyncio.ensure_future(_writer(client))
        try:
            while True:
                text = await ws.receive_text()
                try:
                    cmd = decode_command(text)
                except CommandDecodeError as exc:
                    client.push(
                        json.dumps(
                            {
                                "type": "error",
                                "error": exc.reason,
                                "offset": exc.offset,
                            }
                        )
                    )
                    continue
                try:
                    service.commands.put_nowait((client_id, cmd))
                except asyncio.QueueFull:
                    client.push(json.dumps({"type": "error", "error": "busy"}))
        except WebSocketDisconnect:
            pass
        finally:
            writer.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await writer
            service.detach(client_id)

    return app


def serve(config: GatewayConfig) -> None:
    """Run the gateway until interrupted."""
    import uvicorn

    uvicorn.run(build_app(config), host="0.0.0.0", port=config.port, log_level="info")
