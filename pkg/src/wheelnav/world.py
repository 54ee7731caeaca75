"""World definitions: on-disk format, parsing, and ground-truth rasterization.

A world file is UTF-8 text, one directive per line, ``#`` comments allowed:

    name hospital
    resolution 0.05
    size 20.0 12.0            # meters
    spawn 1.0 1.0 0.0         # x y theta
    goal lobby 18.0 10.0
    rect 4.0 0.0 4.3 6.0      # filled axis-aligned rectangle
    wall 0.0 8.0 10.0 8.0 0.2 # segment with thickness
    dyn 0.3 0.8 1 5.0 2.0 5.0 9.0   # radius speed loop (x y)+

Lengths are meters, angles radians. Worlds are closed: the border cell
ring is forced occupied so raycasts always terminate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from wheelnav.types import Pose2D

DEFAULT_RESOLUTION = 0.05  # m/cell, fine enough for a 0.7 m footprint
MIN_CELLS = 8


class WorldError(Exception):
    """Base class for world-file problems."""


class WorldSyntaxError(WorldError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class WorldSemanticError(WorldError):
    def __init__(self, cause: str, message: str):
        super().__init__(f"{cause}: {message}")
        self.cause = cause


@dataclass(frozen=True)
class Rect:
    """Filled axis-aligned rectangle, corners in meters."""

    x0: float
    y0: float
    x1: float
    y1: float

    def covers(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True)
class Wall:
    """Line segment with thickness; covers points within thickness/2."""

    x0: float
    y0: float
    x1: float
    y1: float
    thickness: float

    def covers(self, x: float, y: float) -> bool:
        return _segment_distance(x, y, self.x0, self.y0, self.x1, self.y1) <= self.thickness / 2.0


Shape = Rect | Wall


@dataclass(frozen=True)
class DynamicObstacleSpec:
    """Disc obstacle shuttling along a waypoint polyline."""

    radius: float  # m
    speed: float  # m/s
    loop: bool  # True: cycle the polyline; False: ping-pong
    waypoints: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise WorldSemanticError("dyn", "radius must be positive")
        if self.speed <= 0:
            raise WorldSemanticError("dyn", "speed must be positive")
        if len(self.waypoints) < 2:
            raise WorldSemanticError("dyn", "needs at least 2 waypoints")


@dataclass(frozen=True)
class WorldSpec:
    name: str
    resolution: float  # m/cell
    width: int  # cells
    height: int  # cells
    static_shapes: tuple[Shape, ...] = ()
    dynamic_obstacles: tuple[DynamicObstacleSpec, ...] = ()
    spawn: Pose2D = field(default_factory=Pose2D)
    named_goals: tuple[tuple[str, float, float], ...] = ()

    @property
    def width_m(self) -> float:
        return self.width * self.resolution

    @property
    def height_m(self) -> float:
        return self.height * self.resolution

    def goal_by_label(self, label: str) -> tuple[float, float]:
        for name, x, y in self.named_goals:
            if name == label:
                return (x, y)
        raise KeyError(f"no goal named {label!r}")


@dataclass(frozen=True)
class GroundTruthGrid:
    """The simulator's omniscient occupancy view; never handed to the stack."""

    resolution: float
    occupied: np.ndarray  # bool, shape (height, width), row-major, row = y

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]


def cell_index(x: float, y: float, resolution: float) -> tuple[int, int]:
    """(row, col) of the cell containing a point; row indexes y."""
    return (int(math.floor(y / resolution)), int(math.floor(x / resolution)))


def cell_center(row: int, col: int, resolution: float) -> tuple[float, float]:
    return ((col + 0.5) * resolution, (row + 0.5) * resolution)


def _segment_distance(px: float, py: float, x0: float, y0: float, x1: float, y1: float) -> float:
    dx, dy = x1 - x0, y1 - y0
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return math.hypot(px - x0, py - y0)
    t = ((px - x0) * dx + (py - y0) * dy) / length_sq
    t = min(max(t, 0.0), 1.0)
    return math.hypot(px - (x0 + t * dx), py - (y0 + t * dy))


def parse_world(text: str) -> WorldSpec:
    """Parse world-file text, validating syntax and world invariants."""
    name = None
    resolution = None
    size_m = None
    spawn = None
    shapes: list[Shape] = []
    dynamics: list[DynamicObstacleSpec] = []
    goals: list[tuple[str, float, float]] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind, args = fields[0], fields[1:]
        try:
            if kind == "name":
                if len(args) != 1:
                    raise ValueError("expected: name <identifier>")
                name = args[0]
            elif kind == "resolution":
                resolution = _parse_floats(args, 1, "resolution <m/cell>")[0]
            elif kind == "size":
                size_m = _parse_floats(args, 2, "size <width_m> <height_m>")
            elif kind == "spawn":
                vals = _parse_floats(args, 3, "spawn <x> <y> <theta>")
                spawn = Pose2D(vals[0], vals[1], vals[2]).normalized()
            elif kind == "goal":
                if len(args) != 3:
                    raise ValueError("expected: goal <label> <x> <y>")
                goals.append((args[0], float(args[1]), float(args[2])))
            elif kind == "rect":
                x0, y0, x1, y1 = _parse_floats(args, 4, "rect <x0> <y0> <x1> <y1>")
                shapes.append(Rect(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)))
            elif kind == "wall":
                x0, y0, x1, y1, t = _parse_floats(args, 5, "wall <x0> <y0> <x1> <y1> <thickness>")
                if t <= 0:
                    raise ValueError("wall thickness must be positive")
                shapes.append(Wall(x0, y0, x1, y1, t))
            elif kind == "dyn":
                if len(args) < 7 or len(args) % 2 == 0:
                    raise ValueError("expected: dyn <radius> <speed> <loop 0|1> (<x> <y>)+")
                radius, speed = float(args[0]), float(args[1])
                loop = bool(int(args[2]))
                coords = [float(v) for v in args[3:]]
                waypoints = tuple(zip(coords[0::2], coords[1::2]))
                dynamics.append(DynamicObstacleSpec(radius, speed, loop, waypoints))
            else:
                raise ValueError(f"unknown directive {kind!r}")
        except WorldSemanticError:
            raise
        except ValueError as exc:
            raise WorldSyntaxError(line_no, str(exc)) from None

    if name is None:
        raise WorldSemanticError("name", "missing required key")
    if resolution is None or resolution <= 0:
        raise WorldSemanticError("resolution", "missing or non-positive")
    if size_m is None:
        raise WorldSemanticError("size", "missing required key")
    if spawn is None:
        raise WorldSemanticError("spawn", "missing required key")

    width = int(round(size_m[0] / resolution))
    height = int(round(size_m[1] / resolution))
    if width < MIN_CELLS or height < MIN_CELLS:
        raise WorldSemanticError("size", f"world must be at least {MIN_CELLS} cells per side")

    spec = WorldSpec(
        name=name,
        resolution=resolution,
        width=width,
        height=height,
        static_shapes=tuple(shapes),
        dynamic_obstacles=tuple(dynamics),
        spawn=spawn,
        named_goals=tuple(goals),
    )
    _validate_semantics(spec)
    return spec


def _parse_floats(args: list[str], n: int, usage: str) -> list[float]:
    if len(args) != n:
        raise ValueError(f"expected: {usage}")
    return [float(a) for a in args]


def _validate_semantics(spec: WorldSpec) -> None:
    w_m, h_m = spec.width_m, spec.height_m

    def inside(x: float, y: float) -> bool:
        return 0.0 <= x <= w_m and 0.0 <= y <= h_m

    for shape in spec.static_shapes:
        if isinstance(shape, Rect):
            ok = inside(shape.x0, shape.y0) and inside(shape.x1, shape.y1)
        else:
            ok = inside(shape.x0, shape.y0) and inside(shape.x1, shape.y1)
        if not ok:
            raise WorldSemanticError("shape out of bounds", f"{shape}")
    for label, x, y in spec.named_goals:
        if not inside(x, y):
            raise WorldSemanticError("goal out of bounds", f"{label} at ({x}, {y})")
    for dyn in spec.dynamic_obstacles:
        for x, y in dyn.waypoints:
            if not inside(x, y):
                raise WorldSemanticError("dynamic obstacle out of bounds", f"waypoint ({x}, {y})")
    if not inside(spec.spawn.x, spec.spawn.y):
        raise WorldSemanticError("spawn out of bounds", f"({spec.spawn.x}, {spec.spawn.y})")

    grid = rasterize(spec)
    row, col = cell_index(spec.spawn.x, spec.spawn.y, spec.resolution)
    if grid.occupied[row, col]:
        raise WorldSemanticError("spawn not free", "spawn cell is occupied after rasterization")


def rasterize(spec: WorldSpec) -> GroundTruthGrid:
    """Rasterize shapes by cell-center containment; border ring forced occupied."""
    res = spec.resolution
    cols = np.arange(spec.width, dtype=np.float64)
    rows = np.arange(spec.height, dtype=np.float64)
    cx = (cols + 0.5) * res  # (W,)
    cy = (rows + 0.5) * res  # (H,)
    gx, gy = np.meshgrid(cx, cy)  # (H, W)

    occupied = np.zeros((spec.height, spec.width), dtype=bool)
    for shape in spec.static_shapes:
        if isinstance(shape, Rect):
            occupied |= (gx >= shape.x0) & (gx <= shape.x1) & (gy >= shape.y0) & (gy <= shape.y1)
        else:
            occupied |= _wall_mask(shape, gx, gy)

    occupied[0, :] = True
    occupied[-1, :] = True
    occupied[:, 0] = True
    occupied[:, -1] = True
    return GroundTruthGrid(resolution=res, occupied=occupied)


def _wall_mask(wall: Wall, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    dx, dy = wall.x1 - wall.x0, wall.y1 - wall.y0
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        dist = np.hypot(gx - wall.x0, gy - wall.y0)
    else:
        t = ((gx - wall.x0) * dx + (gy - wall.y0) * dy) / length_sq
        t = np.clip(t, 0.0, 1.0)
        dist = np.hypot(gx - (wall.x0 + t * dx), gy - (wall.y0 + t * dy))
    return dist <= wall.thickness / 2.0


def serialize_world(spec: WorldSpec) -> str:
    """Render a spec back to the file format; parse(serialize(s)) == s."""
    lines = [
        f"name {spec.name}",
        f"resolution {spec.resolution!r}",
        f"size {spec.width_m!r} {spec.height_m!r}",
        f"spawn {spec.spawn.x!r} {spec.spawn.y!r} {spec.spawn.theta!r}",
    ]
    for label, x, y in spec.named_goals:
        lines.append(f"goal {label} {x!r} {y!r}")
    for shape in spec.static_shapes:
        if isinstance(shape, Rect):
            lines.append(f"rect {shape.x0!r} {shape.y0!r} {shape.x1!r} {shape.y1!r}")
        else:
            lines.append(f"wall {shape.x0!r} {shape.y0!r} {shape.x1!r} {shape.y1!r} {shape.thickness!r}")
    for dyn in spec.dynamic_obstacles:
        coords = " ".join(f"{x!r} {y!r}" for x, y in dyn.waypoints)
        lines.append(f"dyn {dyn.radius!r} {dyn.speed!r} {int(dyn.loop)} {coords}")
    return "\n".join(lines) + "\n"


def load_world(path: str) -> WorldSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_world(fh.read())


def bundled_world(name: str) -> WorldSpec:
    """Load one of the world files shipped with the package by bare name."""
    from importlib import resources

    ref = resources.files("wheelnav").joinpath(f"worlds/{name}.world")
    if not ref.is_file():
        raise WorldError(f"no bundled world named {name!r}")
    return parse_world(ref.read_text(encoding="utf-8"))


def resolve_world(name_or_path: str) -> WorldSpec:
    """Accept either a filesystem path or the name of a bundled world."""
    if name_or_path.endswith(".world"):
        return load_world(name_or_path)
    return bundled_world(name_or_path)
