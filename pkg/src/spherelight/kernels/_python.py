"""NumPy implementations of the hot kernels.

This backend is always available. It is what the compiled extension is
checked against, so the arithmetic here is written to match the compiled
loops operation for operation (same expressions, same clamping).
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi

# Chunk rows so the score matrix stays a few hundred MB at worst.
_CHUNK = 8192


def nearest_anchor_batch(directions: np.ndarray, anchor_directions: np.ndarray) -> np.ndarray:
    """Exhaustive nearest anchor (largest dot product) per direction.

    Ties break to the lowest anchor index. Directions must be nonzero but
    need not be unit length; anchor directions must be unit vectors.
    """
    directions = np.ascontiguousarray(directions, dtype=np.float64)
    anchors_t = np.ascontiguousarray(anchor_directions.T, dtype=np.float64)
    out = np.empty(directions.shape[0], dtype=np.int32)
    for start in range(0, directions.shape[0], _CHUNK):
        stop = min(start + _CHUNK, directions.shape[0])
        scores = directions[start:stop] @ anchors_t
        out[start:stop] = np.argmax(scores, axis=1)
    return out


def quantize_directions(directions: np.ndarray, width: int, height: int):
    """Map nonzero directions to (u, v) grid cells of a width x height sphere grid."""
    directions = np.asarray(directions, dtype=np.float64)
    x = directions[:, 0]
    y = directions[:, 1]
    z = directions[:, 2]
    norms = np.sqrt(x * x + y * y + z * z)
    polar = np.arccos(np.clip(z / norms, -1.0, 1.0))
    azimuth = np.arctan2(y, x)
    azimuth = np.where(azimuth < 0.0, azimuth + TWO_PI, azimuth)
    u = (azimuth * (width / TWO_PI)).astype(np.int64)
    np.clip(u, 0, width - 1, out=u)
    v = (polar * (height / np.pi)).astype(np.int64)
    np.clip(v, 0, height - 1, out=v)
    return u, v


def lookup_batch(directions: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Grid lookup of the (approximate) nearest anchor per nonzero direction."""
    height, width = cells.shape
    u, v = quantize_directions(directions, width, height)
    return cells[v, u]


def cull(indices: np.ndarray, distances: np.ndarray, colors: np.ndarray, anchor_count: int):
    """Depth-cull reduction: per anchor keep the entry with the smallest distance.

    Distance ties break to the earliest input row. Returns dense per-anchor
    (colors, distances, initialized) arrays with zeros at untouched anchors.
    """
    order = np.lexsort((np.arange(indices.shape[0]), distances, indices))
    sorted_indices = indices[order]
    first = np.ones(order.shape[0], dtype=bool)
    first[1:] = sorted_indices[1:] != sorted_indices[:-1]
    winners = order[first]

    colors_out = np.zeros((anchor_count, 3), dtype=np.float64)
    dist_out = np.zeros(anchor_count, dtype=np.float64)
    init_out = np.zeros(anchor_count, dtype=bool)
    hit = indices[winners]
    colors_out[hit] = colors[winners]
    dist_out[hit] = distances[winners]
    init_out[hit] = True
    return colors_out, dist_out, init_out


def assign_cull(positions: np.ndarray, colors: np.ndarray, cells: np.ndarray, anchor_count: int):
    """Full sphere-sampling kernel: grid-assign each point, then depth-cull.

    Points exactly at the origin are skipped. Returns the same dense
    per-anchor triple as :func:`cull`.
    """
    positions = np.asarray(positions, dtype=np.float64)
    colors = np.asarray(colors, dtype=np.float64)
    x = positions[:, 0]
    y = positions[:, 1]
    z = positions[:, 2]
    norms = np.sqrt(x * x + y * y + z * z)
    keep = norms > 0.0
    if not np.all(keep):
        positions = positions[keep]
        colors = colors[keep]
        norms = norms[keep]
    indices = lookup_batch(positions, cells)
    return cull(indices, norms, colors, anchor_count)
