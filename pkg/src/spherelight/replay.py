"""Replay driver: feed a recording through the client pipeline and report.

The report has two faces: a deterministic CSV (metrics only, byte-stable
for a fixed recording + config + estimator) and a human-readable summary
that additionally shows wall-clock stage timings.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .client import EstimationClient, HttpClient, InProcessClient
from .estimator import FOUR_PI, ShCoefficients, sh_basis_batch, sh_rmse
from .geometry import (
    DEFAULT_GRID_HEIGHT,
    DEFAULT_GRID_WIDTH,
    build_grid,
    generate_anchors,
)
from .pipeline import (
    BUFFERED,
    ERROR,
    SKIPPED_INACTIVE,
    TRIGGERED,
    ClientPipeline,
    PipelineConfig,
)
from .recording import Recording
from .scene import LIGHT_POWER, SCENARIOS, SyntheticScene, blackbody_rgb
from .trigger import TriggerConfig

CSV_COLUMNS = (
    "scenario",
    "position_id",
    "frames",
    "triggered",
    "buffered",
    "skipped_inactive",
    "errors",
    "triggered_pct",
    "bytes_sent",
    "rmse_truth_mean",
    "rmse_truth_std",
    "rmse_baseline_mean",
    "rmse_baseline_std",
    "theta",
    "window",
    "anchor_count",
    "grid_width",
    "grid_height",
)


@dataclass(frozen=True)
class ReplayConfig:
    theta: float = 0.6
    window: int = 4
    grid_width: int = DEFAULT_GRID_WIDTH
    grid_height: int = DEFAULT_GRID_HEIGHT
    server_url: str | None = None
    force_trigger: bool = False
    compute_truth: bool = True
    compute_baseline: bool = True


@dataclass
class PositionReport:
    position_id: str
    frames: int = 0
    triggered: int = 0
    buffered: int = 0
    skipped_inactive: int = 0
    errors: int = 0
    bytes_sent: int = 0
    rmse_truth_mean: float | None = None
    rmse_truth_std: float | None = None
    rmse_baseline_mean: float | None = None
    rmse_baseline_std: float | None = None

    @property
    def triggered_pct(self) -> float:
        return 100.0 * self.triggered / self.frames if self.frames else 0.0


@dataclass
class ReplayReport:
    scenario: str
    config: ReplayConfig
    anchor_count: int
    positions: list[PositionReport]
    stage_percentiles: dict[str, tuple[float, float]] = field(default_factory=dict)

    def csv_bytes(self) -> bytes:
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for p in self.positions:
            row = [
                self.scenario,
                p.position_id,
                str(p.frames),
                str(p.triggered),
                str(p.buffered),
                str(p.skipped_inactive),
                str(p.errors),
                f"{p.triggered_pct:.4f}",
                str(p.bytes_sent),
                _fmt(p.rmse_truth_mean),
                _fmt(p.rmse_truth_std),
                _fmt(p.rmse_baseline_mean),
                _fmt(p.rmse_baseline_std),
                f"{self.config.theta:.4f}",
                str(self.config.window),
                str(self.anchor_count),
                str(self.config.grid_width),
                str(self.config.grid_height),
            ]
            out.write(",".join(row) + "\n")
        return out.getvalue().encode("utf-8")

    def summary(self) -> str:
        lines = [
            f"scenario {self.scenario}: {self.anchor_count} anchors, "
            f"theta={self.config.theta} window={self.config.window} "
            f"grid={self.config.grid_width}x{self.config.grid_height}"
        ]
        for p in self.positions:
            parts = [
                f"  {p.position_id}: {p.frames} frames, "
                f"{p.triggered} triggered ({p.triggered_pct:.2f}%), "
                f"{p.buffered} buffered, {p.skipped_inactive} inactive, "
                f"{p.errors} errors, {p.bytes_sent} bytes"
            ]
            if p.rmse_truth_mean is not None:
                parts.append(
                    f"    rmse vs truth {p.rmse_truth_mean:.4f} +- {p.rmse_truth_std:.4f}"
                )
            if p.rmse_baseline_mean is not None:
                parts.append(
                    f"    rmse vs every-frame baseline {p.rmse_baseline_mean:.4f} "
                    f"+- {p.rmse_baseline_std:.4f}"
                )
            lines.extend(parts)
        if self.stage_percentiles:
            lines.append("  stage timings (wall clock, not part of the CSV):")
            for stage, (p50, p95) in sorted(self.stage_percentiles.items()):
                lines.append(f"    {stage}: p50 {p50:.2f}ms p95 {p95:.2f}ms")
        return "\n".join(lines)


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


class GroundTruthTrack:
    """Per-frame ground-truth SH for one position, precomputed to O(1)/frame.

    Radiance factorizes as geometry * intensity * light-rgb, so the SH
    projection collapses to a fixed (3, 9) kernel scaled per frame.
    Matches scene.ground_truth_sh to floating-point noise.
    """

    def __init__(self, scene: SyntheticScene, position):
        from .geometry import fibonacci_directions
        from .scene import GROUND_TRUTH_DIRECTIONS, _FACE_AXIS, _FACE_SIGN

        p = np.asarray(position, dtype=np.float64).reshape(3)
        dirs = fibonacci_directions(GROUND_TRUTH_DIRECTIONS)
        t, faces = scene.room.exit_hits(p, dirs)
        hits = p + t[:, None] * dirs
        to_light = scene.light_position - hits
        dist_sq = np.sum(to_light * to_light, axis=1)
        normal_component = to_light[np.arange(hits.shape[0]), _FACE_AXIS[faces]]
        cos = np.clip(normal_component * -_FACE_SIGN[faces] / np.sqrt(dist_sq), 0.0, None)
        geometry = scene.room.albedos[faces] * (cos / dist_sq)[:, None] / np.pi
        basis = sh_basis_batch(dirs)
        self._kernel = (FOUR_PI / dirs.shape[0]) * (geometry.T @ basis)
        # Emission is constant over the sphere, so its projection is a
        # frame-independent additive term.
        self._base = np.outer(
            scene.wall_emission, (FOUR_PI / dirs.shape[0]) * basis.sum(axis=0)
        )
        self._scene = scene

    def coefficients(self, frame_index: int) -> ShCoefficients:
        intensity = float(self._scene.intensities[frame_index])
        if intensity == 0.0:
            return ShCoefficients(self._base.copy())
        rgb = blackbody_rgb(float(self._scene.temperatures[frame_index]))
        return ShCoefficients(
            self._base + self._kernel * (LIGHT_POWER * intensity) * rgb[:, None]
        )


def rebuild_scene(recording: Recording) -> SyntheticScene | None:
    """Reconstruct the generating scene from manifest metadata, if possible."""
    builder = SCENARIOS.get(recording.manifest.scenario)
    if builder is None:
        return None
    scene = builder(
        frames=recording.manifest.frame_count,
        width=recording.manifest.width,
        height=recording.manifest.height,
    )
    return scene


def _make_client(config: ReplayConfig) -> EstimationClient:
    if config.server_url:
        return HttpClient(config.server_url)
    return InProcessClient()


def _run_pass(
    recording: Recording,
    config: ReplayConfig,
    force_trigger: bool,
):
    """One sequential pass; returns (per-position outcome lists, estimates, timings)."""
    manifest = recording.manifest
    anchors = generate_anchors(manifest.anchor_count)
    grid = build_grid(anchors, config.grid_width, config.grid_height)
    pipeline = ClientPipeline(
        anchors=anchors,
        intrinsics=manifest.intrinsics(),
        grid=grid,
        config=PipelineConfig(
            trigger=TriggerConfig(theta=config.theta, window=config.window),
            force_trigger=force_trigger,
        ),
        client=_make_client(config),
    )
    for position in recording.estimation_positions:
        pipeline.register_position(position)

    outcome_rows = {p.position_id: [] for p in pipeline.positions}
    estimate_rows = {p.position_id: [] for p in pipeline.positions}
    timings: dict[str, list[float]] = {}
    total_ms: list[float] = []
    for stored in recording.frames:
        frame = stored.to_frame_input()
        result = pipeline.process_frame(frame)
        for outcome in result.outcomes:
            outcome_rows[outcome.position_id].append(outcome)
        for buffers in pipeline.positions:
            estimate_rows[buffers.position_id].append(
                pipeline.current_estimate(buffers, frame.ambient)
            )
        for stage, ms in result.timings_ms.items():
            timings.setdefault(stage, []).append(ms)
        total_ms.append(result.client_ms)
    timings["client_total"] = total_ms
    return pipeline, outcome_rows, estimate_rows, timings


def _rmse_series(estimates, references) -> tuple[float, float] | None:
    values = [
        sh_rmse(est, ref)
        for est, ref in zip(estimates, references)
        if est is not None and ref is not None
    ]
    if not values:
        return None
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std())


def run_replay(recording: Recording, config: ReplayConfig = ReplayConfig()) -> ReplayReport:
    manifest = recording.manifest
    pipeline, outcomes, estimates, timings = _run_pass(recording, config, config.force_trigger)

    baseline_estimates = None
    if config.compute_baseline and not config.force_trigger:
        _, _, baseline_estimates, _ = _run_pass(recording, config, force_trigger=True)

    truth_tracks = None
    scene = rebuild_scene(recording) if config.compute_truth else None
    if scene is not None:
        truth_tracks = {
            buffers.position_id: GroundTruthTrack(scene, buffers.world_position)
            for buffers in pipeline.positions
        }

    reports = []
    for buffers in pipeline.positions:
        pid = buffers.position_id
        rows = outcomes[pid]
        report = PositionReport(
            position_id=pid,
            frames=len(rows),
            triggered=sum(1 for o in rows if o.status == TRIGGERED),
            buffered=sum(1 for o in rows if o.status == BUFFERED),
            skipped_inactive=sum(1 for o in rows if o.status == SKIPPED_INACTIVE),
            errors=sum(1 for o in rows if o.status == ERROR),
            bytes_sent=sum(o.bytes_sent for o in rows),
        )
        if truth_tracks is not None:
            refs = [truth_tracks[pid].coefficients(i) for i in range(len(rows))]
            stats = _rmse_series(estimates[pid], refs)
            if stats is not None:
                report.rmse_truth_mean, report.rmse_truth_std = stats
        if baseline_estimates is not None:
            stats = _rmse_series(estimates[pid], baseline_estimates[pid])
            if stats is not None:
                report.rmse_baseline_mean, report.rmse_baseline_std = stats
        reports.append(report)

    percentiles = {
        stage: (float(np.percentile(vals, 50)), float(np.percentile(vals, 95)))
        for stage, vals in timings.items()
        if vals
    }
    return ReplayReport(
        scenario=manifest.scenario,
        config=config,
        anchor_count=manifest.anchor_count,
        positions=reports,
        stage_percentiles=percentiles,
    )
