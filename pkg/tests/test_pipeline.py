import numpy as np
import pytest

import spherelight.pipeline as pipeline_mod
from spherelight import codec
from spherelight.client import InProcessClient
from spherelight.estimator import ShCoefficients
from spherelight.pipeline import (
    BUFFERED,
    ERROR,
    SKIPPED_INACTIVE,
    TRIGGERED,
    AmbientSample,
    ClientPipeline,
    FrameInput,
    FrameResult,
    PipelineConfig,
    compensate,
    is_active,
)
from spherelight.sampling import CameraIntrinsics, CameraPose
from spherelight.service import EdgeService
from spherelight.trigger import TriggerConfig

INTR = CameraIntrinsics(fx=8.0, fy=8.0, cx=8.0, cy=6.0, width=16, height=12)
AMBIENT = AmbientSample(intensity=400.0)


def _frame(timestamp=0.0, gray=0.5, depth=2.0, pose=None, ambient=AMBIENT):
    rgb = np.full((INTR.height, INTR.width, 3), gray)
    d = np.full((INTR.height, INTR.width), depth)
    return FrameInput(
        timestamp=timestamp,
        rgb=rgb,
        depth=d,
        pose=pose if pose is not None else CameraPose.identity(),
        ambient=ambient,
    )


def _pipeline(anchors, grid, client=None, **config_kwargs):
    pipe = ClientPipeline(
        anchors,
        INTR,
        grid=grid,
        config=PipelineConfig(**config_kwargs),
        client=client,
    )
    pipe.register_position((0.0, 0.0, 1.0))
    return pipe


class TestIsActive:
    # Camera at (0,0,-1.5) looking down +z, 256x192 with f=128: the rig
    # used by the synthetic scenarios.
    POSE = CameraPose(position=np.array([0.0, 0.0, -1.5]), orientation=np.array([1.0, 0.0, 0.0, 0.0]))
    WIDE = CameraIntrinsics(fx=128.0, fy=128.0, cx=128.0, cy=96.0, width=256, height=192)

    def test_center_point(self):
        assert is_active((0.0, 0.0, 0.5), self.POSE, self.WIDE)

    def test_behind_camera(self):
        assert not is_active((0.0, 0.0, -3.0), self.POSE, self.WIDE)
        # Margin never rescues a point behind the camera.
        assert not is_active((0.0, 0.0, -3.0), self.POSE, self.WIDE, margin_deg=80.0)

    def test_off_screen_and_margin(self):
        p = (10.0, 0.0, 0.5)  # projects to u=768, far right of a 256-wide image
        assert not is_active(p, self.POSE, self.WIDE)
        assert not is_active(p, self.POSE, self.WIDE, margin_deg=40.0)
        assert is_active(p, self.POSE, self.WIDE, margin_deg=80.0)

    def test_bounds_half_open(self):
        # u = 256 exactly: outside. u = 0 exactly: inside.
        assert not is_active((2.0, 0.0, 0.5), self.POSE, self.WIDE)
        assert is_active((-2.0, 0.0, 0.5), self.POSE, self.WIDE)

    def test_rotated_pose(self):
        # 180 degrees about y: camera looks down -z, so a -z point is visible.
        pose = CameraPose(
            position=np.array([0.0, 0.0, 0.0]),
            orientation=np.array([0.0, 0.0, 1.0, 0.0]),
        )
        assert is_active((0.0, 0.0, -2.0), pose, self.WIDE)
        assert not is_active((0.0, 0.0, 2.0), pose, self.WIDE)


class TestCompensate:
    def _sh(self):
        return ShCoefficients(np.arange(27.0).reshape(3, 9) + 1.0)

    def test_identity(self):
        out = compensate(self._sh(), AMBIENT, AMBIENT)
        np.testing.assert_array_equal(out.values, self._sh().values)

    def test_intensity_scales(self):
        out = compensate(self._sh(), AmbientSample(200.0), AmbientSample(300.0))
        np.testing.assert_allclose(out.values, 1.5 * self._sh().values)

    def test_intensity_clamped(self):
        brighter = compensate(self._sh(), AmbientSample(100.0), AmbientSample(1000.0))
        np.testing.assert_allclose(brighter.values, 2.0 * self._sh().values)
        dimmer = compensate(self._sh(), AmbientSample(1000.0), AmbientSample(100.0))
        np.testing.assert_allclose(dimmer.values, 0.5 * self._sh().values)

    def test_color_ratio_per_channel(self):
        then = AmbientSample(400.0, color=(1.0, 1.0, 0.5))
        now = AmbientSample(400.0, color=(0.5, 1.0, 0.9))
        out = compensate(self._sh(), then, now)
        np.testing.assert_allclose(out.values[0], 0.5 * self._sh().values[0])
        np.testing.assert_allclose(out.values[1], self._sh().values[1])
        np.testing.assert_allclose(out.values[2], 1.8 * self._sh().values[2])

    def test_zero_denominator_channel_unscaled(self):
        then = AmbientSample(400.0, color=(0.0, 1.0, 1.0))
        now = AmbientSample(400.0, color=(0.8, 1.0, 1.0))
        out = compensate(self._sh(), then, now)
        np.testing.assert_array_equal(out.values[0], self._sh().values[0])

    def test_nonpositive_then_intensity(self):
        with pytest.raises(ValueError):
            compensate(self._sh(), AmbientSample(0.0), AMBIENT)


class TestAmbientSample:
    def test_validation(self):
        with pytest.raises(ValueError):
            AmbientSample(-1.0)
        with pytest.raises(ValueError):
            AmbientSample(float("nan"))
        with pytest.raises(ValueError):
            AmbientSample(100.0, color=(1.2, 0.0, 0.0))
        with pytest.raises(ValueError):
            AmbientSample(100.0, color=(0.5, 0.5))

    def test_zero_intensity_allowed(self):
        assert AmbientSample(0.0).intensity == 0.0


class TestFrameLoop:
    def test_first_frame_triggers(self, anchors_128, grid_128):
        pipe = _pipeline(anchors_128, grid_128)
        result = pipe.process_frame(_frame())
        (outcome,) = result.outcomes
        assert outcome.status == TRIGGERED
        assert outcome.max_pooled == pytest.approx(1.0)
        assert outcome.bytes_sent == len(outcome.packet)
        decoded = codec.decode(outcome.packet)
        assert decoded.anchor_count == anchors_128.count
        assert decoded.initialized_count == pipe.positions[0].temporary.initialized_count

    def test_static_stream_fires_once(self, anchors_128, grid_128):
        pipe = _pipeline(anchors_128, grid_128)
        statuses = []
        for i in range(10):
            (outcome,) = pipe.process_frame(_frame(timestamp=i / 30.0)).outcomes
            statuses.append(outcome.status)
        assert statuses[0] == TRIGGERED
        assert statuses[1:] == [BUFFERED] * 9

    def test_persistent_untouched_while_buffered(self, anchors_128, grid_128):
        pipe = _pipeline(anchors_128, grid_128)
        pipe.process_frame(_frame(timestamp=0.0))
        buffers = pipe.positions[0]
        snapshot_colors = buffers.persistent.colors.copy()
        snapshot_mask = buffers.persistent.initialized.copy()
        for i in range(1, 6):
            (outcome,) = pipe.process_frame(
                _frame(timestamp=i / 30.0, gray=0.5 + 0.02 * i)
            ).outcomes
            assert outcome.status == BUFFERED
        np.testing.assert_array_equal(buffers.persistent.colors, snapshot_colors)
        np.testing.assert_array_equal(buffers.persistent.initialized, snapshot_mask)
        # The temporary buffer did keep accumulating the newest colors.
        assert not np.array_equal(buffers.temporary.colors, snapshot_colors)

    def test_full_scale_flip_retriggers(self, anchors_128, grid_128):
        pipe = _pipeline(anchors_128, grid_128)
        pipe.process_frame(_frame(timestamp=0.0, gray=0.0))
        (outcome,) = pipe.process_frame(_frame(timestamp=1 / 30.0, gray=1.0)).outcomes
        assert outcome.status == TRIGGERED
        assert outcome.max_pooled == pytest.approx(1.0)

    def test_force_trigger_sends_every_frame(self, anchors_128, grid_128):
        pipe = _pipeline(anchors_128, grid_128, force_trigger=True)
        for i in range(4):
            (outcome,) = pipe.process_frame(_frame(timestamp=i / 30.0)).outcomes
            assert outcome.status == TRIGGERED

    def test_inactive_frame_skips_backprojection(self, anchors_128, grid_128, monkeypatch):
        pipe = _pipeline(anchors_128, grid_128)

        def boom(*args, **kwargs):
            raise AssertionError("backproject must not run on inactive frames")

        monkeypatch.setattr(pipeline_mod, "backproject", boom)
        # Camera turned 180 degrees: the position at +z is behind it.
        pose = CameraPose(
            position=np.array([0.0, 0.0, 0.0]),
            orientation=np.array([0.0, 0.0, 1.0, 0.0]),
        )
        result = pipe.process_frame(_frame(pose=pose))
        (outcome,) = result.outcomes
        assert outcome.status == SKIPPED_INACTIVE
        assert result.timings_ms == {}

    def test_mixed_active_inactive(self, anchors_128, grid_128):
        pipe = _pipeline(anchors_128, grid_128)
        pipe.register_position((0.0, 0.0, -5.0))  # behind the camera
        result = pipe.process_frame(_frame())
        by_id = {o.position_id: o.status for o in result.outcomes}
        assert by_id["p0"] == TRIGGERED
        assert by_id["p1"] == SKIPPED_INACTIVE

    def test_error_isolated_per_position(self, anchors_128, grid_128):
        class FlakyClient(InProcessClient):
            def __init__(self):
                super().__init__(EdgeService(min_anchor_count=64))

            def estimate(self, session_id, position_id, packet):
                if position_id == "p1":
                    raise RuntimeError("socket torn")
                return super().estimate(session_id, position_id, packet)

        pipe = ClientPipeline(anchors_128, INTR, grid=grid_128, client=FlakyClient())
        pipe.register_position((0.0, 0.0, 1.0))
        pipe.register_position((0.1, 0.0, 1.0))
        result = pipe.process_frame(_frame())
        by_id = {o.position_id: o for o in result.outcomes}
        assert by_id["p0"].status == TRIGGERED
        assert by_id["p1"].status == ERROR
        assert "RuntimeError" in by_id["p1"].error
        assert pipe.positions[0].last_response is not None
        assert pipe.positions[1].last_response is None

    def test_client_round_trip_installs_response(self, anchors_128, grid_128):
        client = InProcessClient(EdgeService(min_anchor_count=64))
        pipe = ClientPipeline(anchors_128, INTR, grid=grid_128, client=client)
        assert pipe.session_id is not None
        buffers = pipe.register_position((0.0, 0.0, 1.0))
        assert buffers.position_id == "p0"
        pipe.process_frame(_frame(timestamp=2.0))
        assert buffers.last_response is not None
        assert buffers.response_timestamp == 2.0
        assert buffers.ambient_at_response == AMBIENT


class TestResponses:
    def _buffers(self, anchors_128, grid_128):
        pipe = _pipeline(anchors_128, grid_128)
        return pipe, pipe.positions[0]

    def test_stale_response_dropped(self, anchors_128, grid_128):
        pipe, buffers = self._buffers(anchors_128, grid_128)
        newer = ShCoefficients(np.full((3, 9), 2.0))
        older = ShCoefficients(np.full((3, 9), 1.0))
        assert pipe.apply_response(buffers, 5.0, newer, AMBIENT)
        assert not pipe.apply_response(buffers, 3.0, older, AMBIENT)
        np.testing.assert_array_equal(buffers.last_response.values, newer.values)
        assert buffers.response_timestamp == 5.0
        assert pipe.apply_response(buffers, 6.0, older, AMBIENT)
        assert buffers.response_timestamp == 6.0

    def test_current_estimate_compensates(self, anchors_128, grid_128):
        pipe, buffers = self._buffers(anchors_128, grid_128)
        assert pipe.current_estimate(buffers, AMBIENT) is None
        response = ShCoefficients(np.ones((3, 9)))
        pipe.apply_response(buffers, 1.0, response, AmbientSample(200.0))
        doubled = pipe.current_estimate(buffers, AmbientSample(400.0))
        np.testing.assert_allclose(doubled.values, 2.0)
        same = pipe.current_estimate(buffers, AmbientSample(200.0))
        np.testing.assert_array_equal(same.values, response.values)


def test_with_config_clones_buffers(anchors_128, grid_128):
    pipe = _pipeline(anchors_128, grid_128)
    pipe.process_frame(_frame())
    clone = pipe.with_config(PipelineConfig(trigger=TriggerConfig(theta=0.1)))
    assert clone.config.trigger.theta == 0.1
    clone.positions[0].temporary.colors[:] = 9.0
    assert pipe.positions[0].temporary.colors.max() <= 1.0
    assert clone.positions[0].position_id == pipe.positions[0].position_id


def test_client_ms_excludes_send():
    result = FrameResult(outcomes=[], timings_ms={"backproject": 1.0, "sample": 2.0, "send": 50.0})
    assert result.client_ms == pytest.approx(3.0)
