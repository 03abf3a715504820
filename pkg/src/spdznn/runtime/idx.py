"""IDX dataset files (the MNIST container format)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _parse(buf: bytes, magic: int, ndims: int) -> tuple[tuple[int, ...], np.ndarray]:
    if len(buf) < 4:
        raise FormatError("truncated magic number", 0)
    (got,) = struct.unpack_from(">I", buf, 0)
    if got != magic:
        raise FormatError(f"bad magic 0x{got:08x}, expected 0x{magic:08x}", 0)
    end = 4 + 4 * ndims
    if len(buf) < end:
        raise FormatError("truncated dimension header", len(buf))
    dims = struct.unpack_from(f">{ndims}I", buf, 4)
    if any(d == 0 for d in dims[1:]):
        raise FormatError("zero-sized dimension", 8)
    size = int(np.prod(dims))
    if len(buf) < end + size:
        raise FormatError(f"truncated data: need {size} bytes, have {len(buf) - end}", len(buf))
    if len(buf) > end + size:
        raise FormatError("trailing bytes after data", end + size)
    return dims, np.frombuffer(buf, dtype=np.uint8, count=size, offset=end).reshape(dims)


def parse_images(buf: bytes) -> np.ndarray:
    """(count, rows, cols) pixels scaled to [0, 1]."""
    _, data = _parse(buf, IMAGES_MAGIC, 3)
    return data.astype(np.float64) / 255.0


def parse_labels(buf: bytes) -> np.ndarray:
    _, data = _parse(buf, LABELS_MAGIC, 1)
    return data.astype(np.int64)


def load_idx_dataset(images_path: str | Path, labels_path: str | Path
                     ) -> tuple[np.ndarray, np.ndarray]:
    images = parse_images(Path(images_path).read_bytes())
    labels = parse_labels(Path(labels_path).read_bytes())
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels", 4)
    return images, labels


def encode_images(images: np.ndarray) -> bytes:
    """Inverse of parse_images for uint8 arrays (used to build fixtures)."""
    images = np.asarray(images, dtype=np.uint8)
    return struct.pack(">4I", IMAGES_MAGIC, *images.shape) + images.tobytes()


def encode_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABELS_MAGIC, len(labels)) + labels.tobytes()
