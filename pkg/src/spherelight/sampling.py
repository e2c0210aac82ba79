"""Raw point-cloud handling and unit-sphere downsampling.

The central operation is :func:`sphere_sample`, which collapses a world
point cloud (translated so the estimation position sits at the origin)
onto the anchor sphere: every point is matched to its nearest anchor and
the point closest to the origin wins the anchor, approximating depth
culling. :func:`completeness_entropy` scores how much of the sphere an
observation covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import AccelerationGrid, AnchorSet, fibonacci_directions

# Anchor-size sweep for the completeness entropy: powers of two 2..4096.
ENTROPY_ANCHOR_SIZES = tuple(2**k for k in range(1, 13))


@dataclass
class PointCloud:
    """World-space colored points: positions in meters, colors in [0, 1]."""

    positions: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if self.positions.shape[0] != self.colors.shape[0]:
            raise ValueError("positions and colors must have the same length")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("point positions must be finite")
        self.colors = np.clip(self.colors, 0.0, 1.0)

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass
class UnitSphereCloud:
    """Per-anchor (color, distance, initialized) state; index = anchor id."""

    colors: np.ndarray
    distances: np.ndarray
    initialized: np.ndarray

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        self.distances = np.asarray(self.distances, dtype=np.float64).reshape(-1)
        self.initialized = np.asarray(self.initialized, dtype=bool).reshape(-1)
        n = self.colors.shape[0]
        if self.distances.shape[0] != n or self.initialized.shape[0] != n:
            raise ValueError("colors, distances and initialized must share length")

    @classmethod
    def empty(cls, anchor_count: int) -> "UnitSphereCloud":
        return cls(
            colors=np.zeros((anchor_count, 3)),
            distances=np.zeros(anchor_count),
            initialized=np.zeros(anchor_count, dtype=bool),
        )

    @property
    def anchor_count(self) -> int:
        return self.colors.shape[0]

    @property
    def initialized_count(self) -> int:
        return int(np.count_nonzero(self.initialized))

    def copy(self) -> "UnitSphereCloud":
        return UnitSphereCloud(
            colors=self.colors.copy(),
            distances=self.distances.copy(),
            initialized=self.initialized.copy(),
        )


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class CameraPose:
    """World-space camera pose: position plus unit quaternion (w, x, y, z)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64).reshape(3))
        object.__setattr__(
            self, "orientation", np.asarray(self.orientation, dtype=np.float64).reshape(4)
        )
        norm = float(np.linalg.norm(self.orientation))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"orientation quaternion must be unit length, norm={norm}")

    @classmethod
    def identity(cls, position=(0.0, 0.0, 0.0)) -> "CameraPose":
        return cls(position=np.asarray(position, dtype=np.float64), orientation=np.array([1.0, 0, 0, 0]))

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.orientation
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )


def backproject(
    rgb: np.ndarray,
    depth: np.ndarray,
    intrinsics: CameraIntrinsics,
    pose: CameraPose,
) -> PointCloud:
    """RGB-D frame -> world-space point cloud, row-major pixel order.

    Zero-depth pixels are skipped. Camera space follows the pinhole model
    with +z forward along the optical axis.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    h, w = intrinsics.height, intrinsics.width
    if rgb.shape != (h, w, 3) or depth.shape != (h, w):
        raise ValueError(
            f"frame dimensions {rgb.shape}/{depth.shape} do not match intrinsics {w}x{h}"
        )
    if np.any(depth < 0):
        raise ValueError("depths must be nonnegative")

    flat_depth = depth.reshape(-1)
    keep = flat_depth > 0
    d = flat_depth[keep]
    pixel = np.nonzero(keep)[0]
    u = (pixel % w).astype(np.float64)
    v = (pixel // w).astype(np.float64)

    cam = np.empty((d.shape[0], 3))
    cam[:, 0] = (u - intrinsics.cx) * d / intrinsics.fx
    cam[:, 1] = (v - intrinsics.cy) * d / intrinsics.fy
    cam[:, 2] = d
    world = cam @ pose.rotation_matrix().T + pose.position
    return PointCloud(positions=world, colors=rgb.reshape(-1, 3)[keep])


def translate_to(cloud: PointCloud, estimation_position) -> PointCloud:
    """Re-center the cloud so the estimation position becomes the origin."""
    offset = np.asarray(estimation_position, dtype=np.float64).reshape(3)
    return PointCloud(positions=cloud.positions - offset, colors=cloud.colors)


def sphere_sample(
    cloud: PointCloud,
    anchors: AnchorSet,
    grid: AccelerationGrid | None = None,
) -> UnitSphereCloud:
    """Project points onto the anchor sphere with depth culling.

    With a grid, anchor matching uses the O(1) quantized lookup; without
    one it falls back to the exact exhaustive search. Points at the
    origin are skipped; distance ties keep the earliest input point.
    """
    if grid is not None and grid.anchor_count != anchors.count:
        raise ValueError(
            f"grid was built for {grid.anchor_count} anchors, got anchor set of {anchors.count}"
        )
    if grid is not None:
        colors, dists, init = kernels.assign_cull(
            cloud.positions, cloud.colors, grid.cells, anchors.count
        )
        return UnitSphereCloud(colors=colors, distances=dists, initialized=init)

    p = cloud.positions
    norms = np.sqrt(np.sum(p * p, axis=1))
    keep = norms > 0
    p, c, norms = p[keep], cloud.colors[keep], norms[keep]
    if p.shape[0] == 0:
        return UnitSphereCloud.empty(anchors.count)
    indices = kernels.nearest_anchor_batch(p, anchors.directions)
    colors, dists, init = kernels.cull(indices, norms, c, anchors.count)
    return UnitSphereCloud(colors=colors, distances=dists, initialized=init)


def merge(destination: UnitSphereCloud, source: UnitSphereCloud) -> UnitSphereCloud:
    """Anchor-wise overwrite merge: initialized source entries win."""
    if destination.anchor_count != source.anchor_count:
        raise ValueError(
            f"anchor counts differ: {destination.anchor_count} vs {source.anchor_count}"
        )
    out = destination.copy()
    m = source.initialized
    out.colors[m] = source.colors[m]
    out.distances[m] = source.distances[m]
    out.initialized[m] = True
    return out


def completeness_entropy(directions: np.ndarray) -> float:
    """Joint entropy of anchor occupancy across the anchor-size sweep, in bits.

    Directions are assigned to their exact nearest anchor for each lattice
    size in ``ENTROPY_ANCHOR_SIZES``; the per-anchor masses, uniformly
    weighted across sizes, form the distribution whose entropy is
    returned. Higher means a more complete observation. Range:
    log2(12) for a single repeated direction up to log2(12) + 6.5 in the
    uniform limit.
    """
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    if directions.shape[0] == 0:
        raise ValueError("completeness entropy needs at least one direction")
    if np.any(np.sum(directions * directions, axis=1) == 0.0):
        raise ValueError("directions must be nonzero")

    total = directions.shape[0]
    weight = 1.0 / len(ENTROPY_ANCHOR_SIZES)
    entropy = 0.0
    for size in ENTROPY_ANCHOR_SIZES:
        lattice = fibonacci_directions(size)
        assigned = kernels.nearest_anchor_batch(directions, lattice)
        counts = np.bincount(assigned, minlength=size)
        mass = counts[counts > 0] * (weight / total)
        entropy -= float(np.sum(mass * np.log2(mass)))
    return entropy


def uniform_random_downsample(cloud: PointCloud, k: int, seed: int) -> PointCloud:
    """Seeded uniform sampling without replacement."""
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=k, replace=False)
    return PointCloud(positions=cloud.positions[chosen], colors=cloud.colors[chosen])


def farthest_point_downsample(cloud: PointCloud, k: int) -> PointCloud:
    """Greedy farthest-point sampling seeded at input index 0, ties to lowest index."""
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    positions = cloud.positions
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = 0
    min_dist = np.linalg.norm(positions - positions[0], axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(min_dist))
        chosen[i] = nxt
        np.minimum(min_dist, np.linalg.norm(positions - positions[nxt], axis=1), out=min_dist)
    return PointCloud(positions=positions[chosen], colors=cloud.colors[chosen])


def cloud_directions(cloud: PointCloud) -> np.ndarray:
    """Nonzero point directions (unused origin points dropped), unnormalized."""
    p = cloud.positions
    keep = np.sum(p * p, axis=1) > 0
    return p[keep]


def reconstruct_points(cloud: UnitSphereCloud, anchors: AnchorSet) -> PointCloud:
    """Initialized anchors back to 3D points: direction * distance with stored color."""
    if cloud.anchor_count != anchors.count:
        raise ValueError("anchor counts differ")
    m = cloud.initialized
    positions = anchors.directions[m] * cloud.distances[m, None]
    return PointCloud(positions=positions, colors=cloud.colors[m])
