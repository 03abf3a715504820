"""Length-prefixed big-endian integer encoding used by key, store and wire formats."""

from __future__ import annotations

import struct
from typing import Iterable

from .errors import FormatError

_U32 = struct.Struct(">I")


def int_to_bytes(v: int) -> bytes:
    if v < 0:
        raise ValueError("only non-negative integers are encodable")
    return v.to_bytes((v.bit_length() + 7) // 8, "big")


def encode_ints(values: Iterable[int]) -> bytes:
    """Concatenate ``[4-byte length][magnitude bytes]`` entries."""
    parts = []
    for v in values:
        b = int_to_bytes(int(v))
        parts.append(_U32.pack(len(b)))
        parts.append(b)
    return b"".join(parts)


def decode_ints(buf: bytes, offset: int = 0, end: int | None = None,
                count: int | None = None) -> tuple[list[int], int]:
    """Decode entries from ``buf[offset:end]``; returns (values, new offset)."""
    end = len(buf) if end is None else end
    out: list[int] = []
    pos = offset
    while pos < end and (count is None or len(out) < count):
        if pos + 4 > end:
            raise FormatError("truncated length prefix", pos)
        (n,) = _U32.unpack_from(buf, pos)
        pos += 4
        if pos + n > end:
            raise FormatError("truncated integer entry", pos)
        out.append(int.from_bytes(buf[pos:pos + n], "big"))
        pos += n
    if count is not None and len(out) < count:
        raise FormatError(f"expected {count} integers, found {len(out)}", pos)
    return out, pos


def encode_counted(values: list[int]) -> bytes:
    """``[4-byte count]`` followed by length-prefixed entries."""
    return _U32.pack(len(values)) + encode_ints(values)


def decode_counted(buf: bytes, offset: int = 0) -> tuple[list[int], int]:
    if offset + 4 > len(buf):
        raise FormatError("truncated entry count", offset)
    (count,) = _U32.unpack_from(buf, offset)
    return decode_ints(buf, offset + 4, count=count)
