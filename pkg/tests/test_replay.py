import numpy as np
import pytest

from spherelight.recording import record_scene
from spherelight.replay import (
    CSV_COLUMNS,
    GroundTruthTrack,
    PositionReport,
    ReplayConfig,
    rebuild_scene,
    run_replay,
)
from spherelight.sampling import CameraPose
from spherelight.scene import (
    BoxRoom,
    SyntheticScene,
    default_intrinsics,
    ground_truth_sh,
    scenario_r1,
    scenario_static,
)

SMALL_GRID = dict(grid_width=128, grid_height=64)


def _config(**kwargs):
    merged = {**SMALL_GRID, **kwargs}
    return ReplayConfig(**merged)


@pytest.fixture(scope="module")
def r1_recording():
    return record_scene(scenario_r1(frames=30, width=64, height=48), anchor_count=512)


@pytest.fixture(scope="module")
def static_recording():
    return record_scene(scenario_static(frames=15, width=64, height=48), anchor_count=512)


@pytest.fixture(scope="module")
def blink_recording():
    # Light toggles on and off every frame: a worst case for the trigger,
    # and a label the replay cannot rebuild a truth track for.
    frames = 12
    scene = SyntheticScene(
        room=BoxRoom.default(),
        light_position=(0.0, 0.5, 0.0),
        temperatures=np.full(frames, 4000.0),
        intensities=np.where(np.arange(frames) % 2 == 0, 0.9, 0.0),
        poses=[CameraPose.identity(position=(0.0, 0.0, -1.5))] * frames,
        estimation_positions=[np.array([0.0, 0.0, 0.5])],
        intrinsics=default_intrinsics(64, 48),
        label="blink",
    )
    return record_scene(scene, anchor_count=512)


def test_csv_is_deterministic(r1_recording):
    first = run_replay(r1_recording, _config()).csv_bytes()
    second = run_replay(r1_recording, _config()).csv_bytes()
    assert first == second
    header = first.decode().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert len(first.decode().splitlines()) == 2  # header + one position


def test_outcome_conservation(r1_recording):
    report = run_replay(r1_recording, _config(compute_truth=False, compute_baseline=False))
    p = report.positions[0]
    assert p.frames == 30
    assert p.triggered + p.buffered + p.skipped_inactive + p.errors == p.frames
    assert p.errors == 0
    assert p.bytes_sent > 0
    assert report.anchor_count == 512
    assert report.scenario == "r1"


def test_static_scene_triggers_once(static_recording):
    report = run_replay(static_recording, _config(compute_baseline=False))
    p = report.positions[0]
    assert p.triggered == 1
    assert p.buffered == 14
    # One packet went out; its cost shows up in the byte counter.
    assert 10 < p.bytes_sent < 10 + 7 * 512 + 1


def test_threshold_monotonicity(blink_recording):
    counts = []
    for theta in (0.02, 0.1, 0.3, 0.95):
        report = run_replay(
            blink_recording,
            _config(theta=theta, compute_truth=False, compute_baseline=False),
        )
        counts.append(report.positions[0].triggered)
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == 12  # every flip clears a near-zero threshold
    assert counts[-1] == 1  # only the initial one-sided frame clears 0.95
    assert counts[1] > counts[2]


def test_force_trigger_dominates_accuracy(r1_recording):
    selective = run_replay(r1_recording, _config(compute_baseline=False)).positions[0]
    forced = run_replay(
        r1_recording, _config(force_trigger=True, compute_baseline=False)
    ).positions[0]
    assert forced.triggered == 30
    # Sending every frame can only help accuracy; the trigger trades a
    # bounded amount of it for bandwidth.
    assert forced.rmse_truth_mean <= selective.rmse_truth_mean + 1e-6
    assert forced.rmse_baseline_mean is None


def test_baseline_rmse_reported(r1_recording):
    report = run_replay(r1_recording, _config())
    p = report.positions[0]
    assert p.rmse_baseline_mean is not None
    assert p.rmse_baseline_mean >= 0.0
    assert p.rmse_truth_mean is not None
    assert p.rmse_truth_std is not None


def test_truth_track_matches_direct_projection():
    scene = scenario_r1(frames=30, width=32, height=24)
    position = scene.estimation_positions[0]
    track = GroundTruthTrack(scene, position)
    for index in (0, 10, 29):
        direct = ground_truth_sh(scene, position, index).values
        fast = track.coefficients(index).values
        assert np.abs(direct - fast).max() < 1e-9


def test_rebuild_scene_from_manifest(r1_recording):
    scene = rebuild_scene(r1_recording)
    assert scene is not None
    assert scene.label == "r1"
    assert scene.frame_count == 30
    assert scene.intrinsics.width == 64
    assert scene.intrinsics.height == 48


def test_rebuild_unknown_scenario(blink_recording):
    assert rebuild_scene(blink_recording) is None


def test_unknown_scenario_leaves_truth_blank(blink_recording):
    report = run_replay(blink_recording, _config(compute_baseline=False))
    p = report.positions[0]
    assert p.rmse_truth_mean is None
    row = report.csv_bytes().decode().splitlines()[1].split(",")
    truth_idx = CSV_COLUMNS.index("rmse_truth_mean")
    assert row[truth_idx] == ""


def test_summary_and_csv_split_timings(static_recording):
    report = run_replay(
        static_recording, _config(compute_truth=False, compute_baseline=False)
    )
    text = report.summary()
    assert "p50" in text and "p95" in text
    assert "not part of the CSV" in text
    assert b"p50" not in report.csv_bytes()
    for stage in ("backproject", "sample", "trigger", "encode", "send", "client_total"):
        assert stage in report.stage_percentiles


def test_csv_row_fields(static_recording):
    report = run_replay(
        static_recording, _config(compute_truth=False, compute_baseline=False)
    )
    row = dict(
        zip(CSV_COLUMNS, report.csv_bytes().decode().splitlines()[1].split(","))
    )
    assert row["scenario"] == "static"
    assert row["position_id"] == "p0"
    assert row["frames"] == "15"
    assert row["triggered"] == "1"
    assert row["theta"] == "0.6000"
    assert row["window"] == "4"
    assert row["anchor_count"] == "512"
    assert row["grid_width"] == "128"


def test_triggered_pct():
    report = PositionReport(position_id="p0", frames=200, triggered=3)
    assert report.triggered_pct == pytest.approx(1.5)
    assert PositionReport(position_id="p0").triggered_pct == 0.0
