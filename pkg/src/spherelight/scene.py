"""Deterministic synthetic scenes: a box room, a point light, a camera path.

The renderer ray-casts an axis-aligned room from inside (convex, so
every wall point sees the light and no shadowing exists), shades with a
Lambertian model under inverse-square falloff, and colors the light by a
piecewise-linear blackbody lookup. Everything is a pure function of the
scene description and frame index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimator import FOUR_PI, ShCoefficients, sh_basis_batch
from .geometry import fibonacci_directions
from .pipeline import AmbientSample, FrameInput
from .sampling import CameraIntrinsics, CameraPose

LIGHT_POWER = 3.0
AMBIENT_LUX_SCALE = 800.0
GROUND_TRUTH_DIRECTIONS = 100_000

# Blackbody color knots: temperature kelvin -> linear RGB, red-normalized.
# Piecewise-linear in between; blue/red ratio strictly increases with
# temperature, which is the property the evaluation leans on.
BLACKBODY_KNOTS = (
    (1500.0, (1.000, 0.424, 0.101)),
    (3000.0, (1.000, 0.706, 0.420)),
    (5000.0, (1.000, 0.924, 0.822)),
    (6500.0, (0.949, 0.988, 1.000)),
)

_KNOT_T = np.array([k[0] for k in BLACKBODY_KNOTS])
_KNOT_RGB = np.array([k[1] for k in BLACKBODY_KNOTS])

# Face order: -x, +x, -y (floor), +y (ceiling), -z, +z.
_FACE_AXIS = np.array([0, 0, 1, 1, 2, 2])
_FACE_SIGN = np.array([-1, 1, -1, 1, -1, 1])

DEFAULT_ALBEDOS = np.array(
    [
        (0.75, 0.72, 0.68),
        (0.70, 0.74, 0.71),
        (0.55, 0.48, 0.40),
        (0.88, 0.88, 0.86),
        (0.72, 0.70, 0.73),
        (0.68, 0.73, 0.70),
    ]
)


def blackbody_rgb(temperature: float) -> np.ndarray:
    """Linear RGB of the light at a correlated color temperature in kelvin."""
    if not 1500.0 <= temperature <= 6500.0:
        raise ValueError(f"temperature {temperature} outside supported range [1500, 6500] K")
    rgb = np.array(
        [np.interp(temperature, _KNOT_T, _KNOT_RGB[:, c]) for c in range(3)]
    )
    return rgb


@dataclass(frozen=True)
class BoxRoom:
    """Axis-aligned room; albedos indexed by face (-x,+x,-y,+y,-z,+z)."""

    min_corner: np.ndarray
    max_corner: np.ndarray
    albedos: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min_corner", np.asarray(self.min_corner, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max_corner", np.asarray(self.max_corner, dtype=np.float64).reshape(3))
        object.__setattr__(self, "albedos", np.asarray(self.albedos, dtype=np.float64).reshape(6, 3))
        if not np.all(self.max_corner > self.min_corner):
            raise ValueError("room must have positive extent on every axis")

    @classmethod
    def default(cls) -> "BoxRoom":
        return cls(
            min_corner=(-2.5, -1.5, -2.5),
            max_corner=(2.5, 1.5, 2.5),
            albedos=DEFAULT_ALBEDOS,
        )

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64).reshape(3)
        return bool(np.all(p > self.min_corner) and np.all(p < self.max_corner))

    def exit_hits(self, origin, directions: np.ndarray):
        """First wall hit for rays from an interior origin.

        Returns (t, face_index) with t such that origin + t*direction lies
        on the face. Directions need not be normalized; zero components
        are handled by the usual slab treatment.
        """
        o = np.asarray(origin, dtype=np.float64).reshape(3)
        if not self.contains(o):
            raise ValueError(f"ray origin {o.tolist()} must be inside the room")
        d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_max = (self.max_corner - o) / d
            t_min = (self.min_corner - o) / d
        t_axis = np.where(d > 0, t_max, np.where(d < 0, t_min, np.inf))
        axis = np.argmin(t_axis, axis=1)
        t = t_axis[np.arange(d.shape[0]), axis]
        sign_positive = d[np.arange(d.shape[0]), axis] > 0
        face = axis * 2 + sign_positive.astype(np.int64)
        return t, face


@dataclass
class SyntheticScene:
    """Per-frame light and camera tracks over a fixed room."""

    room: BoxRoom
    light_position: np.ndarray
    temperatures: np.ndarray
    intensities: np.ndarray
    poses: list[CameraPose]
    estimation_positions: list[np.ndarray]
    intrinsics: CameraIntrinsics
    # Constant self-emission of every wall, added on top of the reflected
    # light. Nonzero mostly in verification scenes (a uniformly emissive
    # white room has a pure-dc SH expansion).
    wall_emission: np.ndarray = (0.0, 0.0, 0.0)
    label: str = "custom"
    fps: float = 30.0

    def __post_init__(self):
        self.light_position = np.asarray(self.light_position, dtype=np.float64).reshape(3)
        self.temperatures = np.asarray(self.temperatures, dtype=np.float64).reshape(-1)
        self.intensities = np.asarray(self.intensities, dtype=np.float64).reshape(-1)
        self.wall_emission = np.asarray(self.wall_emission, dtype=np.float64).reshape(3)
        if np.any(self.wall_emission < 0) or not np.all(np.isfinite(self.wall_emission)):
            raise ValueError("wall emission must be finite and nonnegative")
        n = self.frame_count
        if not (len(self.poses) == self.temperatures.shape[0] == self.intensities.shape[0]):
            raise ValueError("temperatures, intensities and poses must share length")
        if np.any(self.intensities < 0) or np.any(self.intensities > 1):
            raise ValueError("intensities must lie in [0, 1]")
        if not self.room.contains(self.light_position):
            raise ValueError("light must be inside the room")
        for pose in self.poses:
            if not self.room.contains(pose.position):
                raise ValueError("camera path must stay inside the room")
        for p in self.estimation_positions:
            if not self.room.contains(p):
                raise ValueError("estimation positions must be inside the room")
        if n == 0:
            raise ValueError("scene needs at least one frame")

    @property
    def frame_count(self) -> int:
        return len(self.poses)


def _radiance(scene: SyntheticScene, points: np.ndarray, faces: np.ndarray, frame_index: int) -> np.ndarray:
    """Wall radiance: Lambertian reflection of the point light plus emission."""
    emitted = np.broadcast_to(scene.wall_emission, (points.shape[0], 3)).copy()
    intensity = float(scene.intensities[frame_index])
    if intensity == 0.0:
        return emitted
    rgb = blackbody_rgb(float(scene.temperatures[frame_index]))
    to_light = scene.light_position - points
    dist_sq = np.sum(to_light * to_light, axis=1)
    # Inward unit normal dotted with the light direction.
    normal_component = to_light[np.arange(points.shape[0]), _FACE_AXIS[faces]]
    cos = np.clip(normal_component * -_FACE_SIGN[faces] / np.sqrt(dist_sq), 0.0, None)
    irradiance = LIGHT_POWER * intensity * cos / dist_sq
    return emitted + scene.room.albedos[faces] * rgb * irradiance[:, None] / np.pi


def ambient_sample(scene: SyntheticScene, frame_index: int) -> AmbientSample:
    """Sphere-averaged scene radiance, collapsed to the analytic product form.

    Radiance is linear in intensity and separable in the light color, so
    the average is intensity * rgb times a fixed geometry constant.
    """
    intensity = float(scene.intensities[frame_index])
    if intensity == 0.0:
        return AmbientSample(intensity=0.0, color=(1.0, 1.0, 1.0))
    rgb = blackbody_rgb(float(scene.temperatures[frame_index]))
    return AmbientSample(
        intensity=AMBIENT_LUX_SCALE * intensity,
        color=tuple(np.clip(rgb, 0.0, 1.0)),
    )


def render_frame(scene: SyntheticScene, frame_index: int) -> FrameInput:
    """Ray-cast one frame into a FrameInput with LDR colors and metric depth."""
    if not 0 <= frame_index < scene.frame_count:
        raise IndexError(f"frame {frame_index} out of range [0, {scene.frame_count})")
    intr = scene.intrinsics
    pose = scene.poses[frame_index]

    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack(
        [
            (uu - intr.cx) / intr.fx,
            (vv - intr.cy) / intr.fy,
            np.ones_like(uu),
        ],
        axis=-1,
    ).reshape(-1, 3)
    dirs_world = dirs_cam @ pose.rotation_matrix().T
    t, faces = scene.room.exit_hits(pose.position, dirs_world)
    hits = pose.position + t[:, None] * dirs_world

    # Camera z of the hit equals t because the camera-space direction has z=1.
    depth = t.reshape(intr.height, intr.width)
    rgb = np.clip(_radiance(scene, hits, faces, frame_index), 0.0, 1.0)
    return FrameInput(
        timestamp=frame_index / scene.fps,
        rgb=rgb.reshape(intr.height, intr.width, 3),
        depth=depth,
        pose=pose,
        ambient=ambient_sample(scene, frame_index),
    )


def ground_truth_sh(scene: SyntheticScene, position, frame_index: int) -> ShCoefficients:
    """Reference SH of the true (unclipped) radiance field seen from a position."""
    p = np.asarray(position, dtype=np.float64).reshape(3)
    if not scene.room.contains(p):
        raise ValueError(f"position {p.tolist()} must be inside the room")
    dirs = fibonacci_directions(GROUND_TRUTH_DIRECTIONS)
    t, faces = scene.room.exit_hits(p, dirs)
    hits = p + t[:, None] * dirs
    radiance = _radiance(scene, hits, faces, frame_index)
    coeffs = (FOUR_PI / dirs.shape[0]) * (radiance.T @ sh_basis_batch(dirs))
    return ShCoefficients(coeffs)


def look_at_pose(position, target) -> CameraPose:
    """Pose whose +z axis points from position toward target."""
    position = np.asarray(position, dtype=np.float64).reshape(3)
    target = np.asarray(target, dtype=np.float64).reshape(3)
    forward = target - position
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise ValueError("look-at target coincides with the position")
    forward = forward / norm
    ref = np.array([0.0, 1.0, 0.0])
    if abs(float(forward @ ref)) > 0.99:
        ref = np.array([1.0, 0.0, 0.0])
    right = np.cross(ref, forward)
    right /= np.linalg.norm(right)
    up = np.cross(forward, right)
    rot = np.column_stack([right, up, forward])
    return CameraPose(position=position, orientation=_quaternion_from_matrix(rot))


def _quaternion_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Shepperd's method, returning (w, x, y, z) with w >= 0."""
    m = rot
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0:
        s = np.sqrt(trace + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def default_intrinsics(width: int = 256, height: int = 192) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=width / 2.0, fy=width / 2.0, cx=width / 2.0, cy=height / 2.0, width=width, height=height
    )


def _base_scene_args(width: int, height: int):
    return dict(
        room=BoxRoom.default(),
        light_position=np.array([0.0, 0.5, 0.0]),
        intrinsics=default_intrinsics(width, height),
    )


def scenario_r1(frames: int = 300, width: int = 256, height: int = 192) -> SyntheticScene:
    """Fixed camera, light temperature ramp 1500K to 6500K, constant intensity."""
    pose = CameraPose.identity(position=(0.0, 0.0, -1.5))
    return SyntheticScene(
        temperatures=np.linspace(1500.0, 6500.0, frames),
        intensities=np.full(frames, 0.6),
        poses=[pose] * frames,
        estimation_positions=[np.array([0.0, 0.0, 0.5])],
        label="r1",
        **_base_scene_args(width, height),
    )


def scenario_r2(frames: int = 300, width: int = 256, height: int = 192) -> SyntheticScene:
    """Fixed camera, intensity ramp 0 to 100% in 1% steps, constant temperature."""
    pose = CameraPose.identity(position=(0.0, 0.0, -1.5))
    steps = np.minimum(np.arange(frames) * 100 // max(frames - 1, 1), 100)
    return SyntheticScene(
        temperatures=np.full(frames, 4000.0),
        intensities=steps / 100.0,
        poses=[pose] * frames,
        estimation_positions=[np.array([0.0, 0.0, 0.5])],
        label="r2",
        **_base_scene_args(width, height),
    )


def scenario_r3(frames: int = 300, width: int = 256, height: int = 192) -> SyntheticScene:
    """Camera orbiting the room center at fixed light settings."""
    radius = 1.5
    angles = np.linspace(0.0, 2.0 * np.pi, frames, endpoint=False)
    poses = [
        look_at_pose(
            (radius * np.cos(a), 0.0, radius * np.sin(a)),
            (0.0, 0.25, 0.0),
        )
        for a in angles
    ]
    return SyntheticScene(
        temperatures=np.full(frames, 4500.0),
        intensities=np.full(frames, 0.6),
        poses=poses,
        estimation_positions=[np.array([0.0, 0.0, 0.0])],
        label="r3",
        **_base_scene_args(width, height),
    )


def scenario_static(frames: int = 100, width: int = 256, height: int = 192) -> SyntheticScene:
    """Nothing changes: the degenerate baseline for trigger tests."""
    pose = CameraPose.identity(position=(0.0, 0.0, -1.5))
    return SyntheticScene(
        temperatures=np.full(frames, 4000.0),
        intensities=np.full(frames, 0.6),
        poses=[pose] * frames,
        estimation_positions=[np.array([0.0, 0.0, 0.5])],
        label="static",
        **_base_scene_args(width, height),
    )


SCENARIOS = {
    "r1": scenario_r1,
    "r2": scenario_r2,
    "r3": scenario_r3,
    "static": scenario_static,
}


def seeded_scene(seed: int, frames: int = 1, width: int = 64, height: int = 48) -> SyntheticScene:
    """Small randomized single-room scene; everything drawn from one seed.

    Used by the sampler-comparison harness, which wants variety in camera
    placement, light settings and albedos across many cheap scenes.
    """
    rng = np.random.default_rng(seed)
    room = BoxRoom(
        min_corner=(-2.5, -1.5, -2.5),
        max_corner=(2.5, 1.5, 2.5),
        albedos=rng.uniform(0.3, 0.9, size=(6, 3)),
    )
    margin = 0.4
    lo = room.min_corner + margin
    hi = room.max_corner - margin
    light = rng.uniform(lo, hi)
    camera = rng.uniform(lo, hi)
    target = rng.uniform(lo * 0.5, hi * 0.5)
    while np.linalg.norm(target - camera) < 0.3:
        target = rng.uniform(lo * 0.5, hi * 0.5)
    pose = look_at_pose(camera, target)
    return SyntheticScene(
        room=room,
        light_position=light,
        temperatures=np.full(frames, rng.uniform(1500.0, 6500.0)),
        intensities=np.full(frames, rng.uniform(0.4, 1.0)),
        poses=[pose] * frames,
        estimation_positions=[rng.uniform(lo * 0.5, hi * 0.5)],
        intrinsics=default_intrinsics(width, height),
        label=f"seeded-{seed}",
        fps=30.0,
    )
