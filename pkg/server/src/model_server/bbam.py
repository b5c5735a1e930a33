"""Stand-alone reader for BBAM dense-network model files.

Format (little-endian): magic "BBAM", u32 version=1, u32 layer_count, then
per layer: u32 in_dim, u32 out_dim, u8 relu_flag, f32 weights row-major
(out_dim x in_dim), f32 bias (out_dim). This module is deliberately
independent of the attack toolkit; the file format is the only contract.
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = ["BbamError", "DenseModel", "load_bbam"]

MAGIC = b"BBAM"
VERSION = 1


class BbamError(ValueError):
    """Raised when a BBAM file is malformed."""


class DenseModel:
    """flatten -> (dense -> optional ReLU)* -> dense, float64 accumulation."""

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray, bool]]) -> None:
        self.layers = layers
        self.in_dim = layers[0][0].shape[1]
        self.num_classes = layers[-1][0].shape[0]

    def logits(self, flat: np.ndarray) -> np.ndarray:
        x = np.asarray(flat, dtype=np.float64).reshape(-1)
        if x.size != self.in_dim:
            raise ValueError(f"expected {self.in_dim} inputs, got {x.size}")
        for weights, bias, relu in self.layers:
            x = weights.astype(np.float64) @ x + bias.astype(np.float64)
            if relu:
                x = np.maximum(x, 0.0)
        return x


def _take(buf: bytes, offset: int, count: int, what: str) -> tuple[bytes, int]:
    if offset + count > len(buf):
        raise BbamError(f"truncated file: needed {count} bytes for {what} "
                        f"at offset {offset}, have {len(buf) - offset}")
    return buf[offset:offset + count], offset + count


def load_bbam(path) -> DenseModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    chunk, off = _take(buf, 0, 4, "magic")
    if chunk != MAGIC:
        raise BbamError(f"bad magic {chunk!r} at offset 0, expected {MAGIC!r}")
    chunk, off = _take(buf, off, 8, "header")
    version, layer_count = struct.unpack("<II", chunk)
    if version != VERSION:
        raise BbamError(f"unsupported version {version} at offset 4")
    if layer_count < 1:
        raise BbamError("layer_count must be >= 1")
    layers: list[tuple[np.ndarray, np.ndarray, bool]] = []
    prev_out = None
    for i in range(layer_count):
        chunk, off = _take(buf, off, 9, f"layer {i} header")
        in_dim, out_dim, relu_flag = struct.unpack("<IIB", chunk)
        if in_dim < 1 or out_dim < 1:
            raise BbamError(f"layer {i}: non-positive dimensions {in_dim}x{out_dim}")
        if prev_out is not None and in_dim != prev_out:
            raise BbamError(f"layer {i}: in_dim {in_dim} != previous out_dim {prev_out}")
        chunk, off = _take(buf, off, 4 * in_dim * out_dim, f"layer {i} weights")
        weights = np.frombuffer(chunk, dtype="<f4").reshape(out_dim, in_dim)
        chunk, off = _take(buf, off, 4 * out_dim, f"layer {i} bias")
        bias = np.frombuffer(chunk, dtype="<f4")
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise BbamError(f"layer {i}: non-finite weights")
        layers.append((weights, bias, bool(relu_flag)))
        prev_out = out_dim
    if off != len(buf):
        raise BbamError(f"{len(buf) - off} trailing bytes at offset {off}")
    return DenseModel(layers)
