"""Evaluation computations shared by the CLI and the test suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import AccelerationGrid, AnchorSet, lookup_batch, nearest_anchors_exact
from .sampling import (
    PointCloud,
    cloud_directions,
    completeness_entropy,
    farthest_point_downsample,
    sphere_sample,
    uniform_random_downsample,
)

SAMPLER_NAMES = ("uspc", "random", "fps")


@dataclass
class EvalReport:
    """Named scalar metrics; fractions in [0,1], sizes in octets, times in ms."""

    metrics: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.metrics[key]

    def to_csv(self) -> str:
        lines = ["metric,value"]
        for key in sorted(self.metrics):
            lines.append(f"{key},{self.metrics[key]:.6f}")
        return "\n".join(lines) + "\n"


def mismatch_rate(anchors: AnchorSet, grid: AccelerationGrid, directions: np.ndarray) -> float:
    """Fraction of directions where the grid disagrees with exhaustive search."""
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    if directions.shape[0] == 0:
        raise ValueError("mismatch rate needs at least one direction")
    approx = lookup_batch(grid, directions)
    exact = nearest_anchors_exact(anchors, directions)
    return float(np.count_nonzero(approx != exact)) / directions.shape[0]


def relative_entropy(sampled_directions: np.ndarray, raw_directions: np.ndarray) -> float:
    """Completeness entropy of the sample divided by the raw cloud's."""
    return completeness_entropy(sampled_directions) / completeness_entropy(raw_directions)


def uniform_cube_points(count: int, edge: float, seed: int) -> np.ndarray:
    """Points uniform in an origin-centered cube; zero vectors dropped."""
    if count < 1:
        raise ValueError("count must be positive")
    if edge <= 0:
        raise ValueError("edge must be positive")
    rng = np.random.default_rng(seed)
    points = rng.uniform(-edge / 2.0, edge / 2.0, size=(count, 3))
    return points[np.sum(points * points, axis=1) > 0]


def sampler_relative_entropies(
    cloud: PointCloud,
    anchors: AnchorSet,
    grid: AccelerationGrid | None = None,
    seed: int = 0,
    k: int | None = None,
) -> dict[str, float]:
    """Relative entropy of the three downsamplers on one observation cloud.

    The unit-sphere sampler sets the budget: k defaults to its initialized
    anchor count so every sampler keeps the same number of points.
    """
    raw = cloud_directions(cloud)
    sphere = sphere_sample(cloud, anchors, grid)
    if k is None:
        k = sphere.initialized_count
    if k < 1:
        raise ValueError("observation does not cover any anchors")
    k = min(k, len(cloud))
    uspc_dirs = anchors.directions[sphere.initialized]
    random_dirs = cloud_directions(uniform_random_downsample(cloud, k, seed))
    fps_dirs = cloud_directions(farthest_point_downsample(cloud, k))
    return {
        "uspc": relative_entropy(uspc_dirs, raw),
        "random": relative_entropy(random_dirs, raw),
        "fps": relative_entropy(fps_dirs, raw),
    }


def encoding_stats(packet_sizes, raw_frame_bytes: int) -> EvalReport:
    """Wire-size accounting: bytes per request against the raw frame size."""
    sizes = np.asarray(list(packet_sizes), dtype=np.float64)
    if sizes.size == 0:
        raise ValueError("no packets to account for")
    mean = float(sizes.mean())
    return EvalReport(
        {
            "requests": float(sizes.size),
            "bytes_mean": mean,
            "bytes_min": float(sizes.min()),
            "bytes_max": float(sizes.max()),
            "raw_frame_bytes": float(raw_frame_bytes),
            "savings_fraction": 1.0 - mean / raw_frame_bytes,
        }
    )


def timing_percentiles(samples) -> tuple[float, float]:
    """(p50, p95) of a timing series in milliseconds."""
    arr = np.asarray(list(samples), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no timing samples")
    return float(np.percentile(arr, 50)), float(np.percentile(arr, 95))
