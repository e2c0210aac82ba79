"""Recording container: a manifest JSON plus one packed binary frame stream.

Layout per frame, all little-endian, in stream order:

    timestamp  binary64
    pose       3 binary32 position + 4 binary32 quaternion (w, x, y, z)
    ambient    binary32 lux + 3 binary32 color
    positions  u16 count + count * 3 binary32
    rgb        width*height*3 octets, row-major
    depth      width*height u16, row-major, millimeters

Depths are stored in integer millimeters, so a write/read round trip is
lossless whenever the source depths are millimeter-quantized.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .pipeline import AmbientSample, FrameInput
from .sampling import CameraIntrinsics, CameraPose

MANIFEST_NAME = "manifest.json"
FRAMES_NAME = "frames.bin"
DEPTH_UNIT = "millimeter"
MAX_DEPTH_MM = 65535

_PREFIX = struct.Struct("<d3f4f f3f H")


class MalformedRecordingError(ValueError):
    pass


@dataclass(frozen=True)
class RecordingManifest:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    anchor_count: int
    frame_count: int
    scenario: str
    fps: float = 30.0
    depth_unit: str = DEPTH_UNIT

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy, width=self.width, height=self.height
        )


@dataclass
class StoredFrame:
    """One frame in container form: quantized images, float32 metadata."""

    timestamp: float
    position: np.ndarray
    orientation: np.ndarray
    ambient_lux: float
    ambient_color: np.ndarray
    estimation_positions: np.ndarray
    rgb: np.ndarray
    depth_mm: np.ndarray

    @classmethod
    def from_frame_input(cls, frame: FrameInput, estimation_positions) -> "StoredFrame":
        depth_mm = np.floor(np.asarray(frame.depth, dtype=np.float64) * 1000.0 + 0.5)
        if np.any(depth_mm < 0) or np.any(depth_mm > MAX_DEPTH_MM):
            raise ValueError("depths must fit in unsigned 16-bit millimeters")
        rgb = np.floor(np.clip(frame.rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
        return cls(
            timestamp=float(frame.timestamp),
            position=np.asarray(frame.pose.position, dtype=np.float32),
            orientation=np.asarray(frame.pose.orientation, dtype=np.float32),
            ambient_lux=float(frame.ambient.intensity),
            ambient_color=np.asarray(frame.ambient.color, dtype=np.float32),
            estimation_positions=np.asarray(estimation_positions, dtype=np.float32).reshape(-1, 3),
            rgb=rgb,
            depth_mm=depth_mm.astype(np.uint16),
        )

    def to_frame_input(self) -> FrameInput:
        pose = CameraPose(
            position=self.position.astype(np.float64),
            orientation=self.orientation.astype(np.float64),
        )
        ambient = AmbientSample(
            intensity=float(self.ambient_lux),
            color=tuple(np.clip(self.ambient_color.astype(np.float64), 0.0, 1.0)),
        )
        return FrameInput(
            timestamp=self.timestamp,
            rgb=self.rgb.astype(np.float64) / 255.0,
            depth=self.depth_mm.astype(np.float64) / 1000.0,
            pose=pose,
            ambient=ambient,
        )


@dataclass
class Recording:
    manifest: RecordingManifest
    frames: list[StoredFrame]

    @property
    def estimation_positions(self) -> np.ndarray:
        if not self.frames:
            return np.zeros((0, 3))
        return self.frames[0].estimation_positions.astype(np.float64)


def _frame_bytes(frame: StoredFrame) -> bytes:
    count = frame.estimation_positions.shape[0]
    prefix = _PREFIX.pack(
        frame.timestamp,
        *frame.position.astype(np.float32),
        *frame.orientation.astype(np.float32),
        frame.ambient_lux,
        *frame.ambient_color.astype(np.float32),
        count,
    )
    return b"".join(
        (
            prefix,
            frame.estimation_positions.astype("<f4").tobytes(),
            np.ascontiguousarray(frame.rgb).tobytes(),
            frame.depth_mm.astype("<u2").tobytes(),
        )
    )


def write_recording(recording: Recording, path) -> Path:
    """Write manifest.json and frames.bin under a directory; returns the dir."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = recording.manifest
    if manifest.frame_count != len(recording.frames):
        raise ValueError(
            f"manifest frame_count {manifest.frame_count} != {len(recording.frames)} frames"
        )
    (directory / MANIFEST_NAME).write_text(
        json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with open(directory / FRAMES_NAME, "wb") as fh:
        for frame in recording.frames:
            fh.write(_frame_bytes(frame))
    return directory


def _parse_frame(view: memoryview, offset: int, width: int, height: int):
    if offset + _PREFIX.size > len(view):
        raise MalformedRecordingError("truncated frame prefix")
    fields = _PREFIX.unpack_from(view, offset)
    offset += _PREFIX.size
    timestamp = fields[0]
    position = np.array(fields[1:4], dtype=np.float32)
    orientation = np.array(fields[4:8], dtype=np.float32)
    lux = fields[8]
    color = np.array(fields[9:12], dtype=np.float32)
    count = fields[12]

    need = count * 12 + width * height * 3 + width * height * 2
    if offset + need > len(view):
        raise MalformedRecordingError("truncated frame body")
    positions = (
        np.frombuffer(view, dtype="<f4", count=count * 3, offset=offset)
        .reshape(count, 3)
        .copy()
    )
    offset += count * 12
    rgb = (
        np.frombuffer(view, dtype=np.uint8, count=width * height * 3, offset=offset)
        .reshape(height, width, 3)
        .copy()
    )
    offset += width * height * 3
    depth = (
        np.frombuffer(view, dtype="<u2", count=width * height, offset=offset)
        .reshape(height, width)
        .copy()
    )
    offset += width * height * 2
    frame = StoredFrame(
        timestamp=timestamp,
        position=position,
        orientation=orientation,
        ambient_lux=lux,
        ambient_color=color,
        estimation_positions=positions,
        rgb=rgb,
        depth_mm=depth,
    )
    return frame, offset


def read_recording(path) -> Recording:
    directory = Path(path)
    manifest_path = directory / MANIFEST_NAME
    frames_path = directory / FRAMES_NAME
    if not manifest_path.is_file() or not frames_path.is_file():
        raise MalformedRecordingError(f"{directory} is not a recording directory")
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
        manifest = RecordingManifest(**raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedRecordingError(f"bad manifest: {exc}") from exc
    if manifest.depth_unit != DEPTH_UNIT:
        raise MalformedRecordingError(f"unsupported depth unit {manifest.depth_unit!r}")

    blob = frames_path.read_bytes()
    view = memoryview(blob)
    frames: list[StoredFrame] = []
    offset = 0
    last_ts = -np.inf
    for _ in range(manifest.frame_count):
        frame, offset = _parse_frame(view, offset, manifest.width, manifest.height)
        if frame.timestamp <= last_ts:
            raise MalformedRecordingError("timestamps must be strictly increasing")
        last_ts = frame.timestamp
        frames.append(frame)
    if offset != len(blob):
        raise MalformedRecordingError(
            f"{len(blob) - offset} trailing bytes after {manifest.frame_count} frames"
        )
    return Recording(manifest=manifest, frames=frames)


def record_scene(scene, anchor_count: int) -> Recording:
    """Render every frame of a synthetic scene into a Recording."""
    from .scene import render_frame

    frames = [
        StoredFrame.from_frame_input(render_frame(scene, i), scene.estimation_positions)
        for i in range(scene.frame_count)
    ]
    manifest = RecordingManifest(
        width=scene.intrinsics.width,
        height=scene.intrinsics.height,
        fx=scene.intrinsics.fx,
        fy=scene.intrinsics.fy,
        cx=scene.intrinsics.cx,
        cy=scene.intrinsics.cy,
        anchor_count=anchor_count,
        frame_count=scene.frame_count,
        scenario=scene.label,
        fps=scene.fps,
    )
    return Recording(manifest=manifest, frames=frames)
