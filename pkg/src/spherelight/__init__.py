"""Edge-assisted spatially-variant lighting estimation toolkit.

Client side: RGB-D frames are back-projected, re-centered on estimation
positions, collapsed onto a fixed set of unit-sphere anchor directions
with depth culling, and sent to an edge service only when a pooled
anchor-wise change score crosses a threshold. Server side: packets merge
into accumulated per-position observations and a spherical-harmonics
estimator turns them into degree-2 lighting coefficients.
"""

from . import kernels
from .codec import decode, decode_sh, encode, encode_sh
from .estimator import (
    InsufficientObservationError,
    ShCoefficients,
    project_sh,
    sh_basis,
    sh_rmse,
)
from .geometry import (
    AccelerationGrid,
    AnchorSet,
    build_grid,
    generate_anchors,
    lookup,
    nearest_anchor_exact,
)
from .pipeline import AmbientSample, ClientPipeline, FrameInput, PipelineConfig, compensate, is_active
from .sampling import (
    CameraIntrinsics,
    CameraPose,
    PointCloud,
    UnitSphereCloud,
    backproject,
    completeness_entropy,
    farthest_point_downsample,
    merge,
    sphere_sample,
    translate_to,
    uniform_random_downsample,
)
from .service import EdgeService, fan_out_positions
from .trigger import TriggerConfig, anchor_difference, should_trigger

__version__ = "0.1.0"

__all__ = [
    "AccelerationGrid",
    "AmbientSample",
    "AnchorSet",
    "CameraIntrinsics",
    "CameraPose",
    "ClientPipeline",
    "EdgeService",
    "FrameInput",
    "InsufficientObservationError",
    "PipelineConfig",
    "PointCloud",
    "ShCoefficients",
    "TriggerConfig",
    "UnitSphereCloud",
    "anchor_difference",
    "backproject",
    "build_grid",
    "compensate",
    "completeness_entropy",
    "decode",
    "decode_sh",
    "encode",
    "encode_sh",
    "fan_out_positions",
    "farthest_point_downsample",
    "generate_anchors",
    "is_active",
    "kernels",
    "lookup",
    "merge",
    "nearest_anchor_exact",
    "project_sh",
    "sh_basis",
    "sh_rmse",
    "should_trigger",
    "sphere_sample",
    "translate_to",
    "uniform_random_downsample",
    "__version__",
]
