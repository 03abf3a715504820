"""Wire frames.

Layout: [4-byte big-endian payload length][1-byte kind][8-byte session id]
[4-byte round tag][payload of length-prefixed big-endian integers].
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from ..codec import decode_ints, encode_ints
from ..errors import FormatError

HEADER = struct.Struct(">IBQI")
HEADER_SIZE = HEADER.size  # 17 bytes


class MsgKind(enum.IntEnum):
    DATA = 1
    OPEN = 2
    COMMIT = 3
    REVEAL = 4
    CIPHERTEXT = 5
    ABORT = 255


@dataclass(frozen=True)
class Frame:
    kind: MsgKind
    session_id: int
    round_tag: int
    values: list[int]


def encode_frame(kind: int, session_id: int, round_tag: int, values) -> bytes:
    payload = encode_ints(values)
    return HEADER.pack(len(payload), int(kind), session_id, round_tag) + payload


def decode_frame(buf: bytes) -> Frame:
    if len(buf) < HEADER_SIZE:
        raise FormatError("truncated frame header", len(buf))
    length, kind, sid, tag = HEADER.unpack_from(buf, 0)
    if len(buf) != HEADER_SIZE + length:
        raise FormatError(f"frame length mismatch: header says {length}", HEADER_SIZE)
    values, _ = decode_ints(buf, HEADER_SIZE)
    return Frame(MsgKind(kind), sid, tag, values)
