"""Wire codec for unit-sphere clouds and SH coefficient responses.

Packets carry only initialized anchors (striping): a 10-byte header
followed by 7 bytes per entry. All multi-byte fields are little-endian.

Header:  magic ``XSPC`` | version u8 (=1) | flags u8 (=0) |
         anchor_count u16 | entry_count u16
Entry:   anchor index u16 | R u8 | G u8 | B u8 | distance binary16

Colors quantize round-half-up on a 0..255 scale; distances round to the
nearest binary16 with ties to even (numpy's float32 -> float16 cast).
"""

from __future__ import annotations

import struct

import numpy as np

from .sampling import UnitSphereCloud

MAGIC = b"XSPC"
VERSION = 1
HEADER_SIZE = 10
ENTRY_SIZE = 7
SH_PACKET_SIZE = 108

_HEADER = struct.Struct("<4sBBHH")

_ENTRY_DTYPE = np.dtype(
    [("index", "<u2"), ("r", "u1"), ("g", "u1"), ("b", "u1"), ("distance", "<f2")]
)

_F16_MAX = 65504.0


class CodecError(ValueError):
    """Base class for malformed packets."""


class BadMagicError(CodecError):
    pass


class UnsupportedVersionError(CodecError):
    pass


class TruncatedPacketError(CodecError):
    pass


class CorruptPacketError(CodecError):
    """Structurally valid header but inconsistent body (indices, flags, counts)."""


def encode(cloud: UnitSphereCloud) -> bytes:
    """Serialize the initialized anchors of a cloud, ascending index order."""
    if cloud.anchor_count > 0xFFFF:
        raise ValueError(f"anchor_count {cloud.anchor_count} exceeds the u16 header field")
    indices = np.nonzero(cloud.initialized)[0]
    distances = cloud.distances[indices]
    if distances.size and (
        not np.all(np.isfinite(distances))
        or np.any(distances < 0)
        or np.any(distances > _F16_MAX)
    ):
        raise ValueError("distances must be finite, nonnegative and within binary16 range")

    entries = np.empty(indices.shape[0], dtype=_ENTRY_DTYPE)
    entries["index"] = indices
    quantized = np.floor(np.clip(cloud.colors[indices], 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    entries["r"] = quantized[:, 0]
    entries["g"] = quantized[:, 1]
    entries["b"] = quantized[:, 2]
    entries["distance"] = distances.astype(np.float32).astype(np.float16)

    header = _HEADER.pack(MAGIC, VERSION, 0, cloud.anchor_count, entries.shape[0])
    return header + entries.tobytes()


def decode(packet: bytes) -> UnitSphereCloud:
    """Parse a packet back into a dense cloud; inverse of encode up to quantization."""
    packet = bytes(packet)
    if len(packet) < HEADER_SIZE:
        raise TruncatedPacketError(f"packet of {len(packet)} bytes is shorter than the header")
    magic, version, flags, anchor_count, entry_count = _HEADER.unpack_from(packet)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if flags != 0:
        raise CorruptPacketError(f"nonzero flags {flags:#x}")
    if entry_count > anchor_count:
        raise CorruptPacketError(f"entry_count {entry_count} exceeds anchor_count {anchor_count}")
    expected = HEADER_SIZE + ENTRY_SIZE * entry_count
    if len(packet) != expected:
        raise TruncatedPacketError(f"expected {expected} bytes, got {len(packet)}")

    entries = np.frombuffer(packet, dtype=_ENTRY_DTYPE, count=entry_count, offset=HEADER_SIZE)
    indices = entries["index"].astype(np.int64)
    if entry_count:
        if indices[-1] >= anchor_count:
            raise CorruptPacketError("entry index out of range")
        if np.any(np.diff(indices) <= 0):
            raise CorruptPacketError("entry indices must be strictly increasing")

    cloud = UnitSphereCloud.empty(anchor_count)
    cloud.colors[indices, 0] = entries["r"] / 255.0
    cloud.colors[indices, 1] = entries["g"] / 255.0
    cloud.colors[indices, 2] = entries["b"] / 255.0
    cloud.distances[indices] = entries["distance"].astype(np.float64)
    cloud.initialized[indices] = True
    return cloud


def encode_sh(values) -> bytes:
    """27 SH values (3 channels x 9 coefficients, channel-major) -> 108 octets.

    Accepts a bare array or anything with a ``values`` attribute holding one.
    """
    values = getattr(values, "values", values)
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape[0] != 27:
        raise ValueError(f"expected 27 SH values, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("SH values must be finite")
    return arr.astype("<f4").tobytes()


def decode_sh(payload: bytes) -> np.ndarray:
    """108 octets -> (3, 9) float64 array, channel-major."""
    payload = bytes(payload)
    if len(payload) != SH_PACKET_SIZE:
        raise TruncatedPacketError(f"SH payload must be {SH_PACKET_SIZE} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(3, 9)
