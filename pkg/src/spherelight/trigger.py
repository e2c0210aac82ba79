"""On-device triggering: decide when lighting changed enough to re-estimate.

Per-anchor color MSE between the freshly sampled cloud and the persistent
one, pooled by averaging over each anchor's neighborhood (itself plus its
N-1 nearest anchors). A request fires when any pooled value exceeds theta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import AnchorSet
from .sampling import UnitSphereCloud

DEFAULT_THETA = 0.6
DEFAULT_WINDOW = 4


@dataclass(frozen=True)
class TriggerConfig:
    theta: float = DEFAULT_THETA
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must be in (0, 1], got {self.theta}")
        if self.window < 1:
            raise ValueError(f"window must be at least 1, got {self.window}")


class TriggerDecision(NamedTuple):
    triggered: bool
    max_pooled: float


def anchor_difference(temp: UnitSphereCloud, persistent: UnitSphereCloud) -> np.ndarray:
    """Per-anchor change score in [0, 1].

    Both uninitialized -> 0. One-sided initialization -> 1.0, the maximal
    score, so new (or lost) coverage always registers as change. Both
    initialized -> mean squared per-channel color difference.
    """
    if temp.anchor_count != persistent.anchor_count:
        raise ValueError(
            f"anchor counts differ: {temp.anchor_count} vs {persistent.anchor_count}"
        )
    diff = temp.colors - persistent.colors
    mse = np.mean(diff * diff, axis=1)
    both = temp.initialized & persistent.initialized
    either = temp.initialized ^ persistent.initialized
    out = np.zeros(temp.anchor_count)
    out[both] = mse[both]
    out[either] = 1.0
    return out


def pooled_difference(
    difference: np.ndarray, anchors: AnchorSet, window: int
) -> np.ndarray:
    """Sliding-window means: each anchor averaged with its window-1 nearest."""
    if window > anchors.neighbor_capacity + 1:
        raise ValueError(
            f"window {window} exceeds neighbor capacity {anchors.neighbor_capacity} + 1"
        )
    if window == 1:
        return np.asarray(difference, dtype=np.float64).copy()
    members = np.concatenate(
        [np.arange(anchors.count)[:, None], anchors.neighbors[:, : window - 1]], axis=1
    )
    return np.mean(np.asarray(difference, dtype=np.float64)[members], axis=1)


def should_trigger(
    temp: UnitSphereCloud,
    persistent: UnitSphereCloud,
    anchors: AnchorSet,
    config: TriggerConfig = TriggerConfig(),
) -> TriggerDecision:
    """Trigger iff the max pooled difference strictly exceeds config.theta."""
    if anchors.count != temp.anchor_count:
        raise ValueError(
            f"anchor set of {anchors.count} does not match clouds of {temp.anchor_count}"
        )
    diff = anchor_difference(temp, persistent)
    pooled = pooled_difference(diff, anchors, config.window)
    max_pooled = float(pooled.max()) if pooled.size else 0.0
    return TriggerDecision(triggered=max_pooled > config.theta, max_pooled=max_pooled)
