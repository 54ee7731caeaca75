"""Shared fixtures: bundled worlds and their surveyed maps."""

from __future__ import annotations

import time

import pytest

from wheelnav.trials import build_world_map
from wheelnav.world import bundled_world, parse_world


def pytest_configure(config):
    config._suite_started_at = time.perf_counter()


def pytest_collection_modifyitems(config, items):
    # Runtime-budget checks must observe the whole run, so they go last.
    items.sort(key=lambda item: item.get_closest_marker("runs_last") is not None)

# Minimal closed box with one interior wall so scans have structure.
# The wall stub splits the open area without blocking the spawn-goal lane.
BOX_WORLD = """
name box
resolution 0.05
size 6.0 4.0
spawn 1.0 2.0 0.0
goal east 5.0 2.0
rect 2.8 0.0 3.0 1.2
rect 2.8 2.8 3.0 4.0
"""


@pytest.fixture(scope="session")
def box_spec():
    return parse_world(BOX_WORLD)


@pytest.fixture(scope="session")
def box_map(box_spec):
    return build_world_map(box_spec)


@pytest.fixture(scope="session")
def home_spec():
    return bundled_world("home")


@pytest.fixture(scope="session")
def hospital_spec():
    return bundled_world("hospital")


@pytest.fixture(scope="session")
def home_map(home_spec):
    return build_world_map(home_spec)


@pytest.fixture(scope="session")
def hospital_map(hospital_spec):
    return build_world_map(hospital_spec)
