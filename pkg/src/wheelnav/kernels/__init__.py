"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles scalar loops; the numpy backend is a
vectorized (scipy-assisted) fallback. Both implement identical arithmetic
so results match bit-for-bit; selection happens once at import time via
the ``WHEELNAV_NUMBA`` environment variable:

    WHEELNAV_NUMBA=1   force numba (ImportError if unavailable)
    WHEELNAV_NUMBA=0   force the numpy fallback
    unset / auto       numba when importable, else numpy

``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os
from types import ModuleType

_OFF = {"0", "off", "false", "no"}
_ON = {"1", "on", "true", "yes"}


def load_backend(name: str) -> ModuleType:
    """Import a backend module by name ('numba' or 'numpy')."""
    if name == "numba":
        from wheelnav.kernels import numba_impl

        return numba_impl
    if name == "numpy":
        from wheelnav.kernels import numpy_impl

        return numpy_impl
    raise ValueError(f"unknown kernel backend {name!r}")


def _select() -> ModuleType:
    flag = os.environ.get("WHEELNAV_NUMBA", "auto").strip().lower()
    if flag in _OFF:
        return load_backend("numpy")
    if flag in _ON:
        return load_backend("numba")
    try:
        return load_backend("numba")
    except ImportError:
        return load_backend("numpy")


_active = _select()

raycast_grid = _active.raycast_grid
integrate_rays = _active.integrate_rays
score_candidates = _active.score_candidates
min_dist2_grid = _active.min_dist2_grid
min_dist2_block = _active.min_dist2_block
clear_ray_cells = _active.clear_ray_cells
astar_grid = _active.astar_grid

BACKEND_NAME = _active.BACKEND_NAME


def backend_name() -> str:
    return BACKEND_NAME
