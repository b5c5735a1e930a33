"""IMGB dataset files: labeled images in a flat little-endian binary format."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .tensors import ImageTensor

__all__ = ["LabeledImage", "Dataset", "DatasetFormatError", "load_dataset", "save_dataset"]

_IMGB_MAGIC = b"IMGB"
_MAX_SIDE = 1 << 16
_MAX_COUNT = 1 << 24


class DatasetFormatError(ValueError):
    """Malformed IMGB file."""


@dataclass(frozen=True)
class LabeledImage:
    image: ImageTensor
    label: int


class Dataset:
    """Ordered sequence of LabeledImage plus the header metadata."""

    def __init__(self, items: list[LabeledImage], class_count: int) -> None:
        self.items = items
        self.class_count = class_count

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> LabeledImage:
        return self.items[i]

    def __iter__(self) -> Iterator[LabeledImage]:
        return iter(self.items)


def load_dataset(path) -> Dataset:
    """Read an IMGB file; order is file order, errors name the byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()

    if blob[:4] != _IMGB_MAGIC:
        raise DatasetFormatError(f"bad magic {blob[:4]!r} at byte 0")
    if len(blob) < 28:
        raise DatasetFormatError(f"truncated header at byte {len(blob)}")
    version, count, c, h, w, class_count = struct.unpack_from("<IIIIII", blob, 4)
    if version != 1:
        raise DatasetFormatError(f"unsupported version {version} at byte 4")
    if count > _MAX_COUNT:
        raise DatasetFormatError(f"implausible image count {count} at byte 8")
    if not (1 <= c <= 64 and 1 <= h <= _MAX_SIDE and 1 <= w <= _MAX_SIDE):
        raise DatasetFormatError(f"bad shape ({c}, {h}, {w}) at byte 12")
    if class_count < 2:
        raise DatasetFormatError(f"class count {class_count} < 2 at byte 24")

    off = 28
    n_pix = c * h * w
    rec = 4 + 4 * n_pix
    items: list[LabeledImage] = []
    for i in range(count):
        if off + rec > len(blob):
            raise DatasetFormatError(f"image {i}: truncated record at byte {off}")
        (label,) = struct.unpack_from("<I", blob, off)
        if label >= class_count:
            raise DatasetFormatError(f"image {i}: label {label} >= {class_count} at byte {off}")
        pixels = np.frombuffer(blob, dtype="<f4", count=n_pix, offset=off + 4)
        if not np.isfinite(pixels).all():
            raise DatasetFormatError(f"image {i}: non-finite pixels at byte {off + 4}")
        items.append(LabeledImage(ImageTensor(pixels.reshape(c, h, w).copy()), int(label)))
        off += rec
    if off != len(blob):
        raise DatasetFormatError(f"{len(blob) - off} trailing bytes at byte {off}")
    return Dataset(items, int(class_count))


def save_dataset(path, items: list[LabeledImage], class_count: int) -> None:
    """Write an IMGB file (fixture generation and tests)."""
    if not items:
        shape = (1, 1, 1)
    else:
        shape = items[0].image.data.shape
    out = bytearray()
    out += _IMGB_MAGIC
    out += struct.pack("<IIIIII", 1, len(items), shape[0], shape[1], shape[2], class_count)
    for it in items:
        if it.image.data.shape != shape:
            raise ValueError("all images in one file must share a shape")
        out += struct.pack("<I", it.label)
        out += it.image.data.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))
