"""Anchor geometry: deterministic unit-sphere anchors and the lookup grid.

Anchors are generated on a Fibonacci lattice, so client and server can
both rebuild the identical ordered anchor array from a single count. The
acceleration grid trades memory for a constant-time approximate
nearest-anchor lookup over quantized spherical coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels

TWO_PI = 2.0 * math.pi

DEFAULT_ANCHOR_COUNT = 1280
DEFAULT_NEIGHBOR_CAPACITY = 15
DEFAULT_GRID_WIDTH = 1024
DEFAULT_GRID_HEIGHT = 512


@dataclass(frozen=True)
class AnchorSet:
    """Ordered unit-sphere anchor directions plus per-anchor neighbor lists.

    ``directions`` is (count, 3) float64 with unit rows; ``neighbors`` is
    (count, capacity) int32 holding, per anchor, the other anchors sorted
    by ascending angular distance. Treat both arrays as immutable.
    """

    directions: np.ndarray
    neighbors: np.ndarray

    @property
    def count(self) -> int:
        return self.directions.shape[0]

    @property
    def neighbor_capacity(self) -> int:
        return self.neighbors.shape[1]


@dataclass(frozen=True)
class AccelerationGrid:
    """Precomputed nearest-anchor index per quantized (azimuth, polar) cell.

    ``cells[v, u]`` holds the exhaustively computed nearest anchor of the
    cell-center direction, where u indexes azimuth and v indexes polar.
    """

    cells: np.ndarray
    anchor_count: int

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]


@lru_cache(maxsize=32)
def fibonacci_directions(count: int) -> np.ndarray:
    """Deterministic Fibonacci-lattice directions; bit-identical per count."""
    if count < 2:
        raise ValueError(f"anchor count must be >= 2, got {count}")
    j = np.arange(count, dtype=np.float64)
    z = 1.0 - (2.0 * j + 1.0) / count
    azimuth = j * (math.pi * (3.0 - math.sqrt(5.0)))
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    directions = np.column_stack((r * np.cos(azimuth), r * np.sin(azimuth), z))
    directions.setflags(write=False)
    return directions


def generate_anchors(
    count: int = DEFAULT_ANCHOR_COUNT,
    neighbor_capacity: int = DEFAULT_NEIGHBOR_CAPACITY,
) -> AnchorSet:
    """Build the anchor set shared by client and server.

    Neighbor lists are computed by exhaustive pairwise angular-distance
    sort, excluding the anchor itself; within-distance ties keep the
    lower index first.
    """
    if count < 2:
        raise ValueError(f"anchor count must be >= 2, got {count}")
    if not 1 <= neighbor_capacity < count:
        raise ValueError(
            f"neighbor capacity must be in [1, count), got {neighbor_capacity} for count {count}"
        )
    directions = fibonacci_directions(count)
    # Descending dot product == ascending angular distance; stable sort
    # keeps equal-distance neighbors ordered by index. The self entry has
    # the largest dot product and lands in column 0, which we drop.
    dots = directions @ directions.T
    order = np.argsort(-dots, axis=1, kind="stable")
    neighbors = np.ascontiguousarray(order[:, 1 : neighbor_capacity + 1], dtype=np.int32)
    neighbors.setflags(write=False)
    return AnchorSet(directions=directions, neighbors=neighbors)


def to_spherical(direction) -> tuple[float, float]:
    """Cartesian unit direction -> (polar in [0, pi], azimuth in [0, 2*pi))."""
    x, y, z = float(direction[0]), float(direction[1]), float(direction[2])
    norm = math.sqrt(x * x + y * y + z * z)
    if norm == 0.0:
        raise ValueError("cannot convert the zero vector to spherical coordinates")
    polar = math.acos(min(1.0, max(-1.0, z / norm)))
    azimuth = math.atan2(y, x)
    if azimuth < 0.0:
        azimuth += TWO_PI
    if azimuth >= TWO_PI:
        azimuth = 0.0
    return polar, azimuth


def grid_cell_directions(width: int, height: int) -> np.ndarray:
    """Cell-center directions of a width x height sphere grid, row-major (v, u)."""
    u = (np.arange(width, dtype=np.float64) + 0.5) * (TWO_PI / width)
    v = (np.arange(height, dtype=np.float64) + 0.5) * (math.pi / height)
    sin_polar = np.sin(v)[:, None]
    out = np.empty((height, width, 3), dtype=np.float64)
    out[:, :, 0] = sin_polar * np.cos(u)[None, :]
    out[:, :, 1] = sin_polar * np.sin(u)[None, :]
    out[:, :, 2] = np.cos(v)[:, None]
    return out.reshape(-1, 3)


def build_grid(
    anchors: AnchorSet,
    width: int = DEFAULT_GRID_WIDTH,
    height: int = DEFAULT_GRID_HEIGHT,
) -> AccelerationGrid:
    """Exhaustively precompute the nearest anchor for every cell center."""
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {width}x{height}")
    centers = grid_cell_directions(width, height)
    cells = kernels.nearest_anchor_batch(centers, anchors.directions)
    cells = np.ascontiguousarray(cells.reshape(height, width), dtype=np.int32)
    cells.setflags(write=False)
    return AccelerationGrid(cells=cells, anchor_count=anchors.count)


def lookup(grid: AccelerationGrid, direction) -> int:
    """O(1) approximate nearest anchor via quantized spherical coordinates."""
    polar, azimuth = to_spherical(direction)
    u = min(int(azimuth * (grid.width / TWO_PI)), grid.width - 1)
    v = min(int(polar * (grid.height / math.pi)), grid.height - 1)
    return int(grid.cells[v, u])


def lookup_batch(grid: AccelerationGrid, directions: np.ndarray) -> np.ndarray:
    """Vectorized :func:`lookup` over nonzero directions."""
    directions = np.asarray(directions, dtype=np.float64)
    norms = np.sqrt(np.sum(directions * directions, axis=1))
    if np.any(norms == 0.0):
        raise ValueError("cannot look up the zero vector")
    return kernels.lookup_batch(directions, grid.cells)


def nearest_anchor_exact(anchors: AnchorSet, direction) -> int:
    """Exhaustive nearest anchor by angular distance, ties to lowest index."""
    direction = np.asarray(direction, dtype=np.float64)
    if not np.any(direction != 0.0):
        raise ValueError("cannot find the nearest anchor of the zero vector")
    return int(kernels.nearest_anchor_batch(direction[None, :], anchors.directions)[0])


def nearest_anchors_exact(anchors: AnchorSet, directions: np.ndarray) -> np.ndarray:
    """Vectorized :func:`nearest_anchor_exact`."""
    directions = np.asarray(directions, dtype=np.float64)
    norms = np.sum(directions * directions, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("cannot find the nearest anchor of the zero vector")
    return kernels.nearest_anchor_batch(directions, anchors.directions)
