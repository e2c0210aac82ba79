"""Kernel backend selection.

The compiled Cython core is used when the extension was built; otherwise
the NumPy fallback takes over with identical semantics. Set
``SPHERELIGHT_KERNELS=python`` (or call :func:`use_backend`) to force a
backend, e.g. for benchmarking one against the other.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from . import _python

try:
    from . import _core
except ImportError:  # extension not built: NumPy fallback only
    _core = None

_BACKENDS = {"python": _python}
if _core is not None:
    _BACKENDS["compiled"] = _core

_requested = os.environ.get("SPHERELIGHT_KERNELS")
if _requested:
    if _requested not in _BACKENDS:
        raise ImportError(
            f"SPHERELIGHT_KERNELS={_requested!r} but available backends are "
            f"{sorted(_BACKENDS)}"
        )
    _active_name = _requested
else:
    _active_name = "compiled" if "compiled" in _BACKENDS else "python"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active_name


def use_backend(name: str) -> None:
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; available: {sorted(_BACKENDS)}")
    _active_name = name


@contextmanager
def backend(name: str):
    """Temporarily switch the kernel backend."""
    previous = _active_name
    use_backend(name)
    try:
        yield
    finally:
        use_backend(previous)


def nearest_anchor_batch(directions, anchor_directions):
    return _BACKENDS[_active_name].nearest_anchor_batch(directions, anchor_directions)


def lookup_batch(directions, cells):
    return _BACKENDS[_active_name].lookup_batch(directions, cells)


def cull(indices, distances, colors, anchor_count):
    return _BACKENDS[_active_name].cull(indices, distances, colors, anchor_count)


def assign_cull(positions, colors, cells, anchor_count):
    return _BACKENDS[_active_name].assign_cull(positions, colors, cells, anchor_count)
