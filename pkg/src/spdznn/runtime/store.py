"""Per-party preprocessing store and its file format.

A store file is a sequence of records
``[1-byte kind][4-byte modulus length][modulus][4-byte integer count]
[length-prefixed integers]``. Records of one (kind, modulus, parameters)
stream are consumed strictly in file order and never twice.
"""

from __future__ import annotations

import collections
import enum
import struct
from pathlib import Path

from ..codec import decode_ints, encode_ints, int_to_bytes
from ..errors import FormatError, MaterialDepleted

_U32 = struct.Struct(">I")


class Kind(enum.IntEnum):
    TRIPLE = 1
    BIT = 2
    RNDINT = 3
    INVPAIR = 4
    BOUNDED = 5
    MTRIPLE = 6
    PREMUL = 7
    DUAL = 8
    ZERO = 9
    MACKEY = 10


# number of leading parameter integers per kind
PARAM_COUNT = {Kind.BOUNDED: 1, Kind.MTRIPLE: 3, Kind.PREMUL: 1, Kind.DUAL: 2}


class PreprocessingStore:
    def __init__(self):
        self._streams: dict[tuple, collections.deque] = collections.defaultdict(collections.deque)
        self._order: list[tuple[Kind, int, list[int]]] = []
        self.consumed: list[tuple] = []
        self._next_index: dict[tuple, int] = collections.defaultdict(int)
        self.mac_key: tuple[int, int] | None = None  # (modulus, alpha_i)

    def append(self, kind: Kind, modulus: int, ints: list[int]) -> None:
        kind = Kind(kind)
        ints = [int(v) for v in ints]
        if kind == Kind.MACKEY:
            self.mac_key = (modulus, ints[0])
        else:
            k = PARAM_COUNT.get(kind, 0)
            key = (kind, modulus, tuple(ints[:k]))
            self._streams[key].append(ints[k:])
        self._order.append((kind, modulus, ints))

    def pop(self, kind: Kind, modulus: int, params: tuple, count: int) -> list[list[int]]:
        key = (Kind(kind), modulus, tuple(params))
        stream = self._streams.get(key)
        if stream is None or len(stream) < count:
            raise MaterialDepleted(
                f"offline material depleted: need {count} x {Kind(kind).name} mod {modulus}"
                f" {tuple(params)}, have {0 if stream is None else len(stream)}")
        out = [stream.popleft() for _ in range(count)]
        start = self._next_index[key]
        self._next_index[key] = start + count
        self.consumed.extend((key, start + i) for i in range(count))
        return out

    def available(self, kind: Kind, modulus: int, params: tuple = ()) -> int:
        s = self._streams.get((Kind(kind), modulus, tuple(params)))
        return 0 if s is None else len(s)

    def records(self):
        return list(self._order)

    def summary(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for (kind, modulus, params), s in sorted(self._streams.items(), key=lambda kv: repr(kv[0])):
            label = f"{kind.name.lower()} mod {modulus}" + (f" {params}" if params else "")
            out[label] = len(s)
        return out

    # ---- file format ----------------------------------------------------
    def to_bytes(self) -> bytes:
        parts = []
        for kind, modulus, ints in self._order:
            m = int_to_bytes(modulus)
            parts.append(bytes([int(kind)]) + _U32.pack(len(m)) + m
                         + _U32.pack(len(ints)) + encode_ints(ints))
        return b"".join(parts)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, buf: bytes) -> "PreprocessingStore":
        store = cls()
        pos = 0
        while pos < len(buf):
            start = pos
            try:
                kind = Kind(buf[pos])
            except ValueError:
                raise FormatError(f"unknown record kind {buf[pos]}", pos) from None
            pos += 1
            if pos + 4 > len(buf):
                raise FormatError("truncated modulus length", pos)
            (mlen,) = _U32.unpack_from(buf, pos)
            pos += 4
            if pos + mlen > len(buf):
                raise FormatError("truncated modulus", pos)
            modulus = int.from_bytes(buf[pos:pos + mlen], "big")
            pos += mlen
            if pos + 4 > len(buf):
                raise FormatError("truncated integer count", pos)
            (count,) = _U32.unpack_from(buf, pos)
            ints, pos = decode_ints(buf, pos + 4, count=count)
            if modulus < 2:
                raise FormatError("record modulus must be at least 2", start)
            store.append(kind, modulus, ints)
        return store

    @classmethod
    def load(cls, path: str | Path) -> "PreprocessingStore":
        return cls.from_bytes(Path(path).read_bytes())
