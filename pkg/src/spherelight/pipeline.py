"""Per-frame client pipeline.

Frame in, per estimation position: activity check, back-projection,
re-centering, sphere sampling, temporary-buffer merge, trigger decision,
and on trigger a persistent-buffer merge plus an encoded packet out. A
temporal compensation step scales the last server response by ambient
sensor ratios between frames.

The temporary buffer accumulates every frame's sample; the persistent
buffer is the snapshot taken at the last trigger, so the trigger compares
"what I know now" against "what the server was last told".
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import codec
from .estimator import ShCoefficients
from .geometry import AccelerationGrid, AnchorSet
from .sampling import (
    CameraIntrinsics,
    CameraPose,
    UnitSphereCloud,
    backproject,
    merge,
    sphere_sample,
    translate_to,
)
from .trigger import TriggerConfig, should_trigger

log = logging.getLogger(__name__)

SKIPPED_INACTIVE = "skipped-inactive"
BUFFERED = "buffered"
TRIGGERED = "triggered"
ERROR = "error"


@dataclass(frozen=True)
class AmbientSample:
    """Ambient light sensor reading: intensity in lux, color in [0, 1]."""

    intensity: float
    color: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not np.isfinite(self.intensity) or self.intensity < 0:
            raise ValueError(f"intensity must be finite and nonnegative, got {self.intensity}")
        c = tuple(float(v) for v in self.color)
        if len(c) != 3 or any(not 0.0 <= v <= 1.0 for v in c):
            raise ValueError(f"color must be 3 components in [0,1], got {self.color}")
        object.__setattr__(self, "color", c)


@dataclass
class FrameInput:
    """One captured frame: images, pose and the ambient sample."""

    timestamp: float
    rgb: np.ndarray
    depth: np.ndarray
    pose: CameraPose
    ambient: AmbientSample


@dataclass
class PositionBuffers:
    position_id: str
    world_position: np.ndarray
    temporary: UnitSphereCloud
    persistent: UnitSphereCloud
    last_response: ShCoefficients | None = None
    ambient_at_response: AmbientSample | None = None
    response_timestamp: float = float("-inf")

    @classmethod
    def fresh(cls, position_id: str, world_position, anchor_count: int) -> "PositionBuffers":
        return cls(
            position_id=position_id,
            world_position=np.asarray(world_position, dtype=np.float64).reshape(3),
            temporary=UnitSphereCloud.empty(anchor_count),
            persistent=UnitSphereCloud.empty(anchor_count),
        )


@dataclass(frozen=True)
class PipelineConfig:
    trigger: TriggerConfig = TriggerConfig()
    margin_deg: float = 0.0
    # Baseline mode: send on every frame regardless of the pooled difference.
    force_trigger: bool = False


@dataclass
class FrameOutcome:
    position_id: str
    status: str
    max_pooled: float = 0.0
    packet: bytes | None = None
    bytes_sent: int = 0
    error: str = ""


@dataclass
class FrameResult:
    outcomes: list[FrameOutcome]
    timings_ms: dict[str, float] = field(default_factory=dict)

    @property
    def client_ms(self) -> float:
        """Client-side processing: everything except network sends."""
        return sum(v for k, v in self.timings_ms.items() if k != "send")


def is_active(position, pose: CameraPose, intrinsics: CameraIntrinsics, margin_deg: float = 0.0) -> bool:
    """A position is active when it projects inside the camera frustum.

    Camera space is +z forward; a point behind the camera is inactive no
    matter the margin. ``margin_deg`` widens the pixel bounds by
    focal_length * tan(margin) on each side.
    """
    p = np.asarray(position, dtype=np.float64).reshape(3)
    cam = pose.rotation_matrix().T @ (p - pose.position)
    z = cam[2]
    if z <= 0:
        return False
    u = intrinsics.fx * cam[0] / z + intrinsics.cx
    v = intrinsics.fy * cam[1] / z + intrinsics.cy
    mu = intrinsics.fx * np.tan(np.radians(margin_deg)) if margin_deg else 0.0
    mv = intrinsics.fy * np.tan(np.radians(margin_deg)) if margin_deg else 0.0
    return -mu <= u < intrinsics.width + mu and -mv <= v < intrinsics.height + mv


def _clamp_ratio(now: float, then: float) -> float:
    if then == 0.0:
        return 1.0
    return float(np.clip(now / then, 0.5, 2.0))


def compensate(
    last_response: ShCoefficients,
    ambient_then: AmbientSample,
    ambient_now: AmbientSample,
) -> ShCoefficients:
    """Scale a stale response by ambient intensity and per-channel color ratios.

    Ratios are clamped to [0.5, 2.0] so sensor noise cannot blow up the
    estimate; zero-denominator color channels are left unscaled.
    """
    if ambient_then.intensity <= 0:
        raise ValueError("ambient intensity at response time must be positive")
    scale = float(np.clip(ambient_now.intensity / ambient_then.intensity, 0.5, 2.0))
    channel = np.array(
        [_clamp_ratio(n, t) for n, t in zip(ambient_now.color, ambient_then.color)]
    )
    return ShCoefficients(last_response.values * (scale * channel[:, None]))


class ClientPipeline:
    """Drives the per-frame loop for one session's estimation positions.

    ``client`` is optional: without one, triggered packets are returned in
    the outcomes but not sent anywhere, which is what the unit tests and
    the offline benchmark use.
    """

    def __init__(
        self,
        anchors: AnchorSet,
        intrinsics: CameraIntrinsics,
        grid: AccelerationGrid | None = None,
        config: PipelineConfig = PipelineConfig(),
        client=None,
        session_id: str | None = None,
    ):
        self.anchors = anchors
        self.grid = grid
        self.intrinsics = intrinsics
        self.config = config
        self.client = client
        self.session_id = session_id
        self.positions: list[PositionBuffers] = []
        if client is not None and session_id is None:
            self.session_id = client.create_session(anchors.count)

    def register_position(self, world_position) -> PositionBuffers:
        if self.client is not None:
            position_id = self.client.register_position(self.session_id, world_position)
        else:
            position_id = f"p{len(self.positions)}"
        buffers = PositionBuffers.fresh(position_id, world_position, self.anchors.count)
        self.positions.append(buffers)
        return buffers

    def process_frame(self, frame: FrameInput) -> FrameResult:
        timings: dict[str, float] = {}
        outcomes: list[FrameOutcome] = []
        active = [
            is_active(p.world_position, frame.pose, self.intrinsics, self.config.margin_deg)
            for p in self.positions
        ]
        if not any(active):
            # No sampling work at all happens on a fully inactive frame.
            for buffers in self.positions:
                outcomes.append(FrameOutcome(buffers.position_id, SKIPPED_INACTIVE))
            return FrameResult(outcomes, timings)

        t0 = time.perf_counter()
        cloud = backproject(frame.rgb, frame.depth, self.intrinsics, frame.pose)
        timings["backproject"] = (time.perf_counter() - t0) * 1e3
        timings["sample"] = timings["trigger"] = timings["encode"] = timings["send"] = 0.0

        for buffers, act in zip(self.positions, active):
            if not act:
                outcomes.append(FrameOutcome(buffers.position_id, SKIPPED_INACTIVE))
                continue
            try:
                outcomes.append(self._process_position(buffers, cloud, frame, timings))
            except Exception as exc:  # noqa: BLE001 - isolate positions from each other
                outcomes.append(
                    FrameOutcome(buffers.position_id, ERROR, error=f"{type(exc).__name__}: {exc}")
                )
        for outcome in outcomes:
            self._log_outcome(frame, outcome, timings)
        return FrameResult(outcomes, timings)

    def _process_position(
        self,
        buffers: PositionBuffers,
        cloud,
        frame: FrameInput,
        timings: dict[str, float],
    ) -> FrameOutcome:
        t0 = time.perf_counter()
        centered = translate_to(cloud, buffers.world_position)
        sample = sphere_sample(centered, self.anchors, self.grid)
        buffers.temporary = merge(buffers.temporary, sample)
        t1 = time.perf_counter()
        timings["sample"] += (t1 - t0) * 1e3

        decision = should_trigger(
            buffers.temporary, buffers.persistent, self.anchors, self.config.trigger
        )
        fire = decision.triggered or self.config.force_trigger
        t2 = time.perf_counter()
        timings["trigger"] += (t2 - t1) * 1e3

        if not fire:
            return FrameOutcome(buffers.position_id, BUFFERED, max_pooled=decision.max_pooled)

        buffers.persistent = merge(buffers.persistent, buffers.temporary)
        packet = codec.encode(buffers.temporary)
        t3 = time.perf_counter()
        timings["encode"] += (t3 - t2) * 1e3

        if self.client is not None:
            response = self.client.estimate(self.session_id, buffers.position_id, packet)
            timings["send"] += (time.perf_counter() - t3) * 1e3
            self.apply_response(buffers, frame.timestamp, response, frame.ambient)
        return FrameOutcome(
            buffers.position_id,
            TRIGGERED,
            max_pooled=decision.max_pooled,
            packet=packet,
            bytes_sent=len(packet),
        )

    def apply_response(
        self,
        buffers: PositionBuffers,
        request_timestamp: float,
        response: ShCoefficients,
        ambient: AmbientSample,
    ) -> bool:
        """Install a server response unless a newer one already landed."""
        if request_timestamp < buffers.response_timestamp:
            return False
        buffers.last_response = response
        buffers.ambient_at_response = ambient
        buffers.response_timestamp = request_timestamp
        return True

    def current_estimate(self, buffers: PositionBuffers, ambient_now: AmbientSample) -> ShCoefficients | None:
        """Last response compensated to the current ambient conditions."""
        if buffers.last_response is None:
            return None
        if buffers.ambient_at_response is None or buffers.ambient_at_response.intensity <= 0:
            return buffers.last_response
        return compensate(buffers.last_response, buffers.ambient_at_response, ambient_now)

    def with_config(self, config: PipelineConfig) -> "ClientPipeline":
        clone = ClientPipeline(
            self.anchors, self.intrinsics, self.grid, config, self.client, self.session_id
        )
        clone.positions = [
            replace(
                p,
                temporary=p.temporary.copy(),
                persistent=p.persistent.copy(),
            )
            for p in self.positions
        ]
        return clone

    def _log_outcome(self, frame: FrameInput, outcome: FrameOutcome, timings: dict) -> None:
        if not log.isEnabledFor(logging.DEBUG):
            return
        stage_blob = " ".join(f"{k}={v:.2f}ms" for k, v in timings.items())
        log.debug(
            "ts=%.3f position=%s outcome=%s max_pooled=%.4f bytes=%d %s",
            frame.timestamp,
            outcome.position_id,
            outcome.status,
            outcome.max_pooled,
            outcome.bytes_sent,
            stage_blob,
        )
