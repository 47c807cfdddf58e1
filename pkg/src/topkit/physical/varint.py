"""LEB128 varints and delta coding for posting lists."""
from __future__ import annotations

import numpy as np

from ..errors import DataError


def encode_uint(value: int, out: bytearray) -> None:
    if value < 0:
        raise ValueError(f"varint cannot encode negative value {value}")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def encode_uints(values) -> bytes:
    out = bytearray()
    for v in values:
        encode_uint(int(v), out)
    return bytes(out)


def decode_uints(data: bytes, count: int) -> list[int]:
    out = []
    value = 0
    shift = 0
    for byte in data:
        value |= (byte & 0x7F) << shift
        if byte & 0x80:
            shift += 7
        else:
            out.append(value)
            value = 0
            shift = 0
    if shift != 0:
        raise DataError("truncated varint stream")
    if len(out) != count:
        raise DataError(f"expected {count} varints, decoded {len(out)}")
    return out


def encode_deltas(sorted_values) -> bytes:
    """Delta-then-varint encode a strictly ascending sequence of non-negatives."""
    out = bytearray()
    prev = 0
    first = True
    for v in sorted_values:
        v = int(v)
        if not first and v <= prev:
            raise ValueError("delta coding needs a strictly ascending sequence")
        encode_uint(v if first else v - prev, out)
        prev = v
        first = False
    return bytes(out)


def decode_deltas(data: bytes, count: int) -> np.ndarray:
    gaps = decode_uints(data, count)
    if not gaps:
        return np.empty(0, dtype=np.int64)
    out = np.empty(count, dtype=np.int64)
    acc = 0
    for i, g in enumerate(gaps):
        acc += g
        out[i] = acc
    return out
