"""Degree-2 spherical-harmonics estimation.

The default estimator is an analytic Monte Carlo projector over the
initialized anchors. It stands in for a learned model behind the same
callable contract, so a network-backed implementation can be swapped in
without touching the service.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .geometry import AnchorSet
from .sampling import UnitSphereCloud

SH_COEFF_COUNT = 9
FOUR_PI = 4.0 * np.pi

# Real SH normalization constants for l = 0, 1, 2.
_C0 = 0.282095
_C1 = 0.488603
_C2A = 1.092548
_C2B = 0.315392
_C2C = 0.546274


class InsufficientObservationError(ValueError):
    """Raised when an estimate is requested over an empty cloud."""


@dataclass(frozen=True)
class ShCoefficients:
    """(3, 9) channel-major coefficients, (l, m) order (0,0), (1,-1) .. (2,2)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).reshape(3, SH_COEFF_COUNT)
        if not np.all(np.isfinite(arr)):
            raise ValueError("SH coefficients must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls) -> "ShCoefficients":
        return cls(np.zeros((3, SH_COEFF_COUNT)))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@runtime_checkable
class EstimatorInterface(Protocol):
    """Callable contract the edge service runs per estimation request."""

    def __call__(self, cloud: UnitSphereCloud, anchors: AnchorSet) -> ShCoefficients: ...


def sh_basis(direction) -> np.ndarray:
    """The 9 real SH basis values at a unit direction."""
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    norm = float(np.linalg.norm(d))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"direction must be unit length, norm={norm}")
    return sh_basis_batch(d[None, :])[0]


def sh_basis_batch(directions: np.ndarray) -> np.ndarray:
    """Vectorized sh_basis: (n, 3) unit directions -> (n, 9)."""
    d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    out = np.empty((d.shape[0], SH_COEFF_COUNT))
    out[:, 0] = _C0
    out[:, 1] = _C1 * y
    out[:, 2] = _C1 * z
    out[:, 3] = _C1 * x
    out[:, 4] = _C2A * x * y
    out[:, 5] = _C2A * y * z
    out[:, 6] = _C2B * (3.0 * z * z - 1.0)
    out[:, 7] = _C2A * x * z
    out[:, 8] = _C2C * (x * x - y * y)
    return out


def project_sh(cloud: UnitSphereCloud, anchors: AnchorSet) -> ShCoefficients:
    """Monte Carlo SH projection of anchor colors over initialized anchors.

    c_lm(channel) = (4pi / M) * sum_j color_j * Y_lm(dir_j) with M the
    initialized count. Distances play no role here.
    """
    if cloud.anchor_count != anchors.count:
        raise ValueError(
            f"anchor counts differ: cloud {cloud.anchor_count} vs set {anchors.count}"
        )
    mask = cloud.initialized
    m = int(np.count_nonzero(mask))
    if m == 0:
        raise InsufficientObservationError("no initialized anchors to estimate from")
    basis = sh_basis_batch(anchors.directions[mask])
    coeffs = (FOUR_PI / m) * (cloud.colors[mask].T @ basis)
    return ShCoefficients(coeffs)


def sh_rmse(a: ShCoefficients, b: ShCoefficients) -> float:
    """Root mean squared difference over all 27 coefficient values."""
    diff = a.values - b.values
    return float(np.sqrt(np.mean(diff * diff)))
