import numpy as np
import pytest

from spherelight import codec
from spherelight.sampling import UnitSphereCloud

# Hand-assembled packet: header (magic XSPC, v1, flags 0, 5 anchors,
# 2 entries) + entry(1, rgb 255/0/128, f16 1.5) + entry(4, rgb 0/255/255,
# f16 0.25). Frozen; any byte change is a wire break.
GOLDEN_HEX = "585350430100050002000100ff0080003e040000ffff0034"


def _random_cloud(rng, anchor_count=128, fill=0.5):
    cloud = UnitSphereCloud.empty(anchor_count)
    mask = rng.uniform(size=anchor_count) < fill
    cloud.initialized[:] = mask
    cloud.colors[mask] = rng.uniform(size=(mask.sum(), 3))
    cloud.distances[mask] = rng.uniform(0.1, 30.0, size=mask.sum())
    return cloud


def test_golden_bytes():
    cloud = UnitSphereCloud.empty(5)
    cloud.colors[1] = (1.0, 0.0, 0.5)
    cloud.distances[1] = 1.5
    cloud.initialized[1] = True
    cloud.colors[4] = (0.0, 1.0, 1.0)
    cloud.distances[4] = 0.25
    cloud.initialized[4] = True
    assert codec.encode(cloud).hex() == GOLDEN_HEX


def test_golden_decodes():
    cloud = codec.decode(bytes.fromhex(GOLDEN_HEX))
    assert cloud.anchor_count == 5
    assert cloud.initialized_count == 2
    np.testing.assert_allclose(cloud.colors[1], [1.0, 0.0, 128 / 255])
    assert cloud.distances[1] == 1.5
    assert cloud.distances[4] == 0.25


def test_size_law(rng):
    for _ in range(50):
        cloud = _random_cloud(rng, anchor_count=int(rng.integers(2, 300)))
        packet = codec.encode(cloud)
        assert len(packet) == 10 + 7 * cloud.initialized_count


def test_empty_and_full_sizes():
    assert len(codec.encode(UnitSphereCloud.empty(1280))) == 10
    full = UnitSphereCloud.empty(1280)
    full.initialized[:] = True
    full.distances[:] = 1.0
    assert len(codec.encode(full)) == 8970
    partial = UnitSphereCloud.empty(1280)
    partial.initialized[:607] = True
    partial.distances[:607] = 2.0
    assert len(codec.encode(partial)) == 10 + 4249


def test_round_trip_fixed_point(rng):
    cloud = UnitSphereCloud.empty(64)
    mask = rng.uniform(size=64) < 0.6
    cloud.initialized[:] = mask
    cloud.colors[mask] = rng.integers(0, 256, size=(mask.sum(), 3)) / 255.0
    cloud.distances[mask] = rng.integers(1, 64, size=mask.sum()) / 4.0  # f16-exact
    out = codec.decode(codec.encode(cloud))
    np.testing.assert_array_equal(out.initialized, cloud.initialized)
    np.testing.assert_array_equal(out.colors, cloud.colors)
    np.testing.assert_array_equal(out.distances, cloud.distances)


def test_quantization_error_bounds(rng):
    cloud = _random_cloud(rng, anchor_count=256)
    out = codec.decode(codec.encode(cloud))
    mask = cloud.initialized
    assert np.max(np.abs(out.colors[mask] - cloud.colors[mask])) <= 1 / 510 + 1e-12
    np.testing.assert_allclose(out.distances[mask], cloud.distances[mask], rtol=1e-3)


def test_quantization_is_projection(rng):
    cloud = _random_cloud(rng)
    once = codec.decode(codec.encode(cloud))
    twice = codec.decode(codec.encode(once))
    np.testing.assert_array_equal(once.colors, twice.colors)
    np.testing.assert_array_equal(once.distances, twice.distances)
    np.testing.assert_array_equal(once.initialized, twice.initialized)


def test_distance_rounding_ties_to_even():
    cloud = UnitSphereCloud.empty(2)
    cloud.initialized[0] = True
    # 2049 is exactly between the binary16 neighbors 2048 and 2050.
    cloud.distances[0] = 2049.0
    out = codec.decode(codec.encode(cloud))
    assert out.distances[0] == 2048.0


def test_color_rounds_half_up():
    cloud = UnitSphereCloud.empty(1)
    cloud.initialized[0] = True
    cloud.distances[0] = 1.0
    cloud.colors[0] = (1.0 / 510.0, 3.0 / 510.0, 0.0)  # halfway cases
    packet = codec.encode(cloud)
    assert packet[12] == 1 and packet[13] == 2


class TestDecodeErrors:
    def _packet(self):
        return bytearray(bytes.fromhex(GOLDEN_HEX))

    def test_bad_magic(self):
        packet = self._packet()
        packet[0] = 0x59
        with pytest.raises(codec.BadMagicError):
            codec.decode(bytes(packet))

    def test_unsupported_version(self):
        packet = self._packet()
        packet[4] = 2
        with pytest.raises(codec.UnsupportedVersionError):
            codec.decode(bytes(packet))

    def test_nonzero_flags(self):
        packet = self._packet()
        packet[5] = 1
        with pytest.raises(codec.CorruptPacketError):
            codec.decode(bytes(packet))

    def test_truncated_header(self):
        with pytest.raises(codec.TruncatedPacketError):
            codec.decode(b"XSPC\x01\x00")

    def test_truncated_body(self):
        packet = self._packet()
        with pytest.raises(codec.TruncatedPacketError):
            codec.decode(bytes(packet[:-1]))

    def test_trailing_garbage(self):
        with pytest.raises(codec.TruncatedPacketError):
            codec.decode(bytes(self._packet()) + b"\x00")

    def test_entry_count_exceeds_anchor_count(self):
        packet = self._packet()
        packet[6:8] = (1).to_bytes(2, "little")  # anchor_count 1 < 2 entries
        with pytest.raises(codec.CorruptPacketError):
            codec.decode(bytes(packet))

    def test_index_out_of_range(self):
        packet = self._packet()
        packet[17:19] = (5).to_bytes(2, "little")  # == anchor_count
        with pytest.raises(codec.CorruptPacketError):
            codec.decode(bytes(packet))

    def test_unsorted_indices(self):
        packet = self._packet()
        packet[10:12] = (4).to_bytes(2, "little")
        packet[17:19] = (1).to_bytes(2, "little")
        with pytest.raises(codec.CorruptPacketError):
            codec.decode(bytes(packet))

    def test_duplicate_indices(self):
        packet = self._packet()
        packet[17:19] = (1).to_bytes(2, "little")
        with pytest.raises(codec.CorruptPacketError):
            codec.decode(bytes(packet))

    def test_all_variants_are_codec_errors(self):
        for exc in (
            codec.BadMagicError,
            codec.UnsupportedVersionError,
            codec.TruncatedPacketError,
            codec.CorruptPacketError,
        ):
            assert issubclass(exc, codec.CodecError)
            assert issubclass(exc, ValueError)


class TestEncodeErrors:
    def test_anchor_count_overflow(self):
        with pytest.raises(ValueError):
            codec.encode(UnitSphereCloud.empty(70000))

    def test_bad_distances(self):
        for bad in (np.inf, np.nan, -1.0, 70000.0):
            cloud = UnitSphereCloud.empty(4)
            cloud.initialized[0] = True
            cloud.distances[0] = bad
            with pytest.raises(ValueError):
                codec.encode(cloud)

    def test_uninitialized_bad_distance_ignored(self):
        cloud = UnitSphereCloud.empty(4)
        cloud.distances[2] = np.inf  # never encoded, must not trip validation
        assert len(codec.encode(cloud)) == 10


class TestShPayload:
    def test_zero_payload(self):
        assert codec.encode_sh(np.zeros(27)) == b"\x00" * 108

    def test_layout_first_value(self):
        values = np.zeros(27)
        values[0] = 1.0
        payload = codec.encode_sh(values)
        assert payload[:4] == np.float32(1.0).tobytes()
        assert payload[4:] == b"\x00" * 104

    def test_round_trip_bit_identical(self, rng):
        values = rng.normal(size=27).astype(np.float32).astype(np.float64)
        payload = codec.encode_sh(values)
        assert codec.encode_sh(codec.decode_sh(payload)) == payload
        np.testing.assert_array_equal(codec.decode_sh(payload).reshape(-1), values)

    def test_wrong_length(self):
        with pytest.raises(codec.TruncatedPacketError):
            codec.decode_sh(b"\x00" * 107)

    def test_nonfinite_rejected(self):
        values = np.zeros(27)
        values[5] = np.inf
        with pytest.raises(ValueError):
            codec.encode_sh(values)

    def test_accepts_coefficients_object(self):
        from spherelight.estimator import ShCoefficients

        sh = ShCoefficients(np.arange(27.0).reshape(3, 9))
        assert codec.decode_sh(codec.encode_sh(sh))[2, 8] == 26.0
