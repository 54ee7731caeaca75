"""World file parsing, validation, and rasterization."""

from __future__ import annotations

import numpy as np
import pytest

from wheelnav.world import (
    Rect,
    Wall,
    WorldSemanticError,
    WorldSyntaxError,
    bundled_world,
    parse_world,
    serialize_world,
)

FULL_WORLD = """
# comment line
name demo
resolution 0.1
size 5.0 4.0            # trailing comment
spawn 1.0 1.0 0.25
goal door 4.0 3.0
rect 2.0 0.0 2.2 2.0
wall 0.5 3.0 4.5 3.0 0.2
dyn 0.3 0.8 1 3.0 1.0 3.0 3.0
"""


def test_parse_full_directive_set():
    spec = parse_world(FULL_WORLD)
    assert spec.name == "demo"
    assert spec.resolution == 0.1
    assert (spec.width, spec.height) == (50, 40)
    assert spec.spawn.x == 1.0 and spec.spawn.theta == 0.25
    assert spec.named_goals == (("door", 4.0, 3.0),)
    assert isinstance(spec.static_shapes[0], Rect)
    assert isinstance(spec.static_shapes[1], Wall)
    dyn = spec.dynamic_obstacles[0]
    assert dyn.radius == 0.3 and dyn.speed == 0.8 and dyn.loop
    assert dyn.waypoints == ((3.0, 1.0), (3.0, 3.0))


def test_rect_corners_are_normalized():
    spec = parse_world(FULL_WORLD.replace("rect 2.0 0.0 2.2 2.0", "rect 2.2 2.0 2.0 0.0"))
    rect = spec.static_shapes[0]
    assert (rect.x0, rect.y0, rect.x1, rect.y1) == (2.0, 0.0, 2.2, 2.0)


@pytest.mark.parametrize(
    "bad_line, expected_line_no",
    [
        ("name two words", 3),
        ("resolution abc", 3),
        ("rect 1 2 3", 3),
        ("wall 1 2 3 4 0", 3),
        ("dyn 0.3 0.8 1 3.0", 3),
        ("teleport 1 2", 3),
    ],
)
def test_syntax_errors_carry_line_numbers(bad_line, expected_line_no):
    text = "\nname ok\n" + bad_line + "\nresolution 0.1\nsize 5 4\nspawn 1 1 0\n"
    with pytest.raises(WorldSyntaxError) as exc:
        parse_world(text)
    assert exc.value.line_no == expected_line_no


@pytest.mark.parametrize("missing", ["name", "resolution", "size", "spawn"])
def test_missing_required_keys_rejected(missing):
    lines = [
        line
        for line in FULL_WORLD.splitlines()
        if not line.startswith(missing)
    ]
    with pytest.raises(WorldSemanticError):
        parse_world("\n".join(lines))


def test_spawn_inside_wall_rejected():
    with pytest.raises(WorldSemanticError, match="spawn"):
        parse_world(FULL_WORLD.replace("spawn 1.0 1.0 0.25", "spawn 2.1 1.0 0.0"))


def test_out_of_bounds_shape_rejected():
    with pytest.raises(WorldSemanticError, match="out of bounds"):
        parse_world(FULL_WORLD.replace("rect 2.0 0.0 2.2 2.0", "rect 2.0 0.0 9.0 2.0"))


def test_tiny_world_rejected():
    with pytest.raises(WorldSemanticError, match="cells"):
        parse_world("name t\nresolution 0.5\nsize 1.0 1.0\nspawn 0.5 0.5 0\n")


def test_rasterize_border_ring_closed(box_spec):
    from wheelnav.world import rasterize

    occ = rasterize(box_spec).occupied
    assert occ[0, :].all() and occ[-1, :].all()
    assert occ[:, 0].all() and occ[:, -1].all()


def test_rasterize_matches_cell_center_containment():
    # oracle: a cell is occupied iff its center lies inside some shape
    from wheelnav.world import rasterize

    spec = parse_world(FULL_WORLD)
    occ = rasterize(spec).occupied
    res = spec.resolution
    for row in range(spec.height):
        for col in range(spec.width):
            if row in (0, spec.height - 1) or col in (0, spec.width - 1):
                assert occ[row, col]
                continue
            x = (col + 0.5) * res
            y = (row + 0.5) * res
            expect = any(s.covers(x, y) for s in spec.static_shapes)
            assert occ[row, col] == expect, (row, col)


def test_serialize_roundtrip():
    spec = parse_world(FULL_WORLD)
    assert parse_world(serialize_world(spec)) == spec


@pytest.mark.parametrize("name", ["home", "hospital"])
def test_bundled_worlds_load(name):
    spec = bundled_world(name)
    assert spec.name == name
    assert len(spec.named_goals) >= 2
    assert spec.dynamic_obstacles


def test_unknown_bundled_world():
    from wheelnav.world import WorldError

    with pytest.raises(WorldError, match="nowhere"):
        bundled_world("nowhere")
