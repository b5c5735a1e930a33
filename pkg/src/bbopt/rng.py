"""Deterministic random streams.

Every random draw in the toolkit goes through an RngStream backed by numpy's
Philox counter-based generator, so a 64-bit seed fully determines the draw
sequence across runs and platforms. OS entropy is only ever used to pick a
seed, never to advance a stream.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngStream"]

_MASK64 = 0xFFFFFFFFFFFFFFFF


class RngStream:
    """Seeded Philox stream; equal seeds give equal draws."""

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(size=shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=None):
        """Uniform integers in [low, high)."""
        return self._gen.integers(low, high, size=shape)

    def signs(self, shape) -> np.ndarray:
        """Uniform ±1 array."""
        return self._gen.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0

    def raw(self, n: int) -> np.ndarray:
        """n raw 64-bit words; used by reproducibility checks."""
        return self._gen.integers(0, 1 << 64, size=n, dtype=np.uint64)

    def derive(self, index: int) -> "RngStream":
        """Independent child stream for a numbered work item."""
        return RngStream(self.seed ^ (int(index) & _MASK64))
