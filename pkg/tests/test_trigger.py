import numpy as np
import pytest

from spherelight.geometry import AnchorSet, generate_anchors
from spherelight.sampling import UnitSphereCloud
from spherelight.trigger import (
    TriggerConfig,
    anchor_difference,
    pooled_difference,
    should_trigger,
)


def _pair(n=16):
    return UnitSphereCloud.empty(n), UnitSphereCloud.empty(n)


def test_config_defaults_and_validation():
    cfg = TriggerConfig()
    assert cfg.theta == 0.6
    assert cfg.window == 4
    for theta in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            TriggerConfig(theta=theta)
    with pytest.raises(ValueError):
        TriggerConfig(window=0)
    TriggerConfig(theta=1.0, window=1)  # boundary values are legal


def test_both_uninitialized_scores_zero():
    temp, persistent = _pair()
    np.testing.assert_array_equal(anchor_difference(temp, persistent), 0.0)


def test_one_sided_scores_one():
    temp, persistent = _pair()
    temp.initialized[3] = True
    temp.colors[3] = 0.2
    persistent.initialized[7] = True
    diff = anchor_difference(temp, persistent)
    assert diff[3] == 1.0
    assert diff[7] == 1.0
    assert diff[0] == 0.0


def test_both_initialized_mean_square():
    temp, persistent = _pair()
    temp.initialized[0] = persistent.initialized[0] = True
    temp.colors[0] = (1.0, 0.0, 0.5)
    persistent.colors[0] = (0.0, 0.0, 0.5)
    diff = anchor_difference(temp, persistent)
    assert diff[0] == pytest.approx(1.0 / 3.0)


def test_difference_bounded(rng):
    temp, persistent = _pair(64)
    for cloud in (temp, persistent):
        cloud.initialized[:] = rng.uniform(size=64) < 0.7
        cloud.colors[:] = rng.uniform(size=(64, 3))
    diff = anchor_difference(temp, persistent)
    assert diff.min() >= 0.0
    assert diff.max() <= 1.0


def test_count_mismatch():
    with pytest.raises(ValueError):
        anchor_difference(UnitSphereCloud.empty(3), UnitSphereCloud.empty(4))


def test_pooling_hand_case():
    # Two antipodal anchors, each the other's only neighbor. Scores (1, 0)
    # pooled with window 2 average to 0.5 at both.
    anchors = AnchorSet(
        directions=np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]),
        neighbors=np.array([[1], [0]]),
    )
    pooled = pooled_difference(np.array([1.0, 0.0]), anchors, window=2)
    np.testing.assert_allclose(pooled, [0.5, 0.5])


def test_pooling_window_one_is_identity(anchors_128, rng):
    diff = rng.uniform(size=anchors_128.count)
    np.testing.assert_array_equal(pooled_difference(diff, anchors_128, 1), diff)


def test_pooling_spreads_spike(anchors_128):
    diff = np.zeros(anchors_128.count)
    diff[10] = 1.0
    pooled = pooled_difference(diff, anchors_128, 4)
    assert pooled[10] == pytest.approx(0.25)
    # The spike contributes to exactly the anchors that count 10 among
    # their three nearest (plus anchor 10 itself).
    holders = {10} | set(np.nonzero((anchors_128.neighbors[:, :3] == 10).any(axis=1))[0])
    np.testing.assert_allclose(pooled[sorted(holders)], 0.25)
    assert np.count_nonzero(pooled) == len(holders)


def test_pooling_preserves_constant(anchors_128):
    pooled = pooled_difference(np.full(anchors_128.count, 0.37), anchors_128, 4)
    np.testing.assert_allclose(pooled, 0.37)


def test_pooling_window_exceeds_capacity():
    anchors = generate_anchors(16)
    with pytest.raises(ValueError):
        pooled_difference(np.zeros(16), anchors, anchors.neighbor_capacity + 2)


def test_single_spike_under_default_config(anchors_128):
    # One fully changed anchor pools to 0.25 < theta 0.6: no trigger. The
    # same spike with window 1 pools to 1.0 and fires.
    temp = UnitSphereCloud.empty(anchors_128.count)
    persistent = UnitSphereCloud.empty(anchors_128.count)
    temp.initialized[5] = True
    temp.colors[5] = 1.0
    decision = should_trigger(temp, persistent, anchors_128)
    assert not decision.triggered
    assert decision.max_pooled == pytest.approx(0.25)
    narrow = should_trigger(temp, persistent, anchors_128, TriggerConfig(window=1))
    assert narrow.triggered
    assert narrow.max_pooled == pytest.approx(1.0)


def test_threshold_is_strict(anchors_128):
    temp = UnitSphereCloud.empty(anchors_128.count)
    persistent = UnitSphereCloud.empty(anchors_128.count)
    temp.initialized[:] = True
    temp.colors[:] = 1.0
    persistent.initialized[:] = True
    # Max pooled value is exactly theta: must not fire.
    cfg = TriggerConfig(theta=1.0, window=4)
    decision = should_trigger(temp, persistent, anchors_128, cfg)
    assert decision.max_pooled == pytest.approx(1.0)
    assert not decision.triggered
    assert should_trigger(
        temp, persistent, anchors_128, TriggerConfig(theta=0.999)
    ).triggered


def test_identical_clouds_never_fire(anchors_128, rng):
    temp = UnitSphereCloud.empty(anchors_128.count)
    temp.initialized[:] = rng.uniform(size=anchors_128.count) < 0.5
    temp.colors[:] = rng.uniform(size=(anchors_128.count, 3))
    decision = should_trigger(temp, temp.copy(), anchors_128)
    assert not decision.triggered
    assert decision.max_pooled == 0.0


def test_uninitialized_persistent_fires_on_first_coverage(anchors_128):
    # A fresh position has an empty persistent cloud, so any reasonably
    # covered sample is a one-sided wall of ones and must fire.
    temp = UnitSphereCloud.empty(anchors_128.count)
    temp.initialized[:] = True
    temp.colors[:] = 0.1
    decision = should_trigger(temp, UnitSphereCloud.empty(anchors_128.count), anchors_128)
    assert decision.triggered
    assert decision.max_pooled == pytest.approx(1.0)


def test_wider_window_never_raises_max(anchors_1280, rng):
    # Pooling is an average over a neighborhood, so widening the window
    # can only pull the max toward the mean.
    for _ in range(20):
        temp = UnitSphereCloud.empty(anchors_1280.count)
        persistent = UnitSphereCloud.empty(anchors_1280.count)
        for cloud in (temp, persistent):
            cloud.initialized[:] = rng.uniform(size=anchors_1280.count) < 0.8
            cloud.colors[:] = rng.uniform(size=(anchors_1280.count, 3))
        diff = anchor_difference(temp, persistent)
        m1 = pooled_difference(diff, anchors_1280, 1).max()
        m4 = pooled_difference(diff, anchors_1280, 4).max()
        m8 = pooled_difference(diff, anchors_1280, 8).max()
        assert m4 <= m1 + 1e-12
        assert m8 <= m1 + 1e-12
