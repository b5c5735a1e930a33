"""Image tensors and the l-infinity feasible-set projection shared by every attack.

Images are stored as float32 (c, h, w) arrays; all loss and estimator
arithmetic happens in float64.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ImageTensor",
    "clamp01",
    "linf_distance",
    "project_linf",
    "project_linf_array",
]


class ImageTensor:
    """A channel-first (c, h, w) float32 image, immutable after construction."""

    __slots__ = ("data",)

    def __init__(self, data) -> None:
        arr = np.array(data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"expected (c, h, w) data, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty tensor")
        arr.setflags(write=False)
        self.data = arr

    @classmethod
    def from_flat(cls, flat, channels: int, height: int, width: int) -> "ImageTensor":
        arr = np.asarray(flat, dtype=np.float32)
        if arr.size != channels * height * width:
            raise ValueError(
                f"flat data has {arr.size} elements, shape wants {channels * height * width}"
            )
        return cls(arr.reshape(channels, height, width))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def side(self) -> int:
        """Shorter spatial side; the square-size rule works off this."""
        return min(self.data.shape[1], self.data.shape[2])

    def __repr__(self) -> str:  # pragma: no cover
        c, h, w = self.data.shape
        return f"ImageTensor(c={c}, h={h}, w={w})"


def clamp01(t: ImageTensor) -> ImageTensor:
    """Clamp every pixel into [0, 1]."""
    if not np.isfinite(t.data).all():
        raise ValueError("non-finite tensor")
    return ImageTensor(np.clip(t.data, 0.0, 1.0))


def linf_distance(a: ImageTensor, b: ImageTensor) -> float:
    """max_i |a_i - b_i| over all pixels."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    return float(np.max(np.abs(diff)))


def project_linf_array(x_hat: np.ndarray, x: np.ndarray, eps: float) -> np.ndarray:
    """Project a candidate onto {z : ||z - x||_inf <= eps} ∩ [0, 1]^d.

    Returns float32. Both clamps are computed in float64; the final cast can
    round a value one ulp outside the ball, so offenders are pulled back one
    ulp toward x to keep ||r - x||_inf <= eps exactly in float64.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x64 = np.asarray(x, dtype=np.float64)
    r64 = np.clip(np.clip(np.asarray(x_hat, dtype=np.float64), x64 - eps, x64 + eps), 0.0, 1.0)
    r = r64.astype(np.float32)
    diff = r.astype(np.float64) - x64
    over = diff > eps
    under = diff < -eps
    if over.any():
        r[over] = np.nextafter(r[over], np.float32(-np.inf))
    if under.any():
        r[under] = np.nextafter(r[under], np.float32(np.inf))
    return r


def project_linf(x_hat: ImageTensor, x: ImageTensor, eps: float) -> ImageTensor:
    """Nearest point to x_hat inside the eps-ball around x intersected with the unit box."""
    if x_hat.data.shape != x.data.shape:
        raise ValueError(f"shape mismatch: {x_hat.data.shape} vs {x.data.shape}")
    return ImageTensor(project_linf_array(x_hat.data, x.data, eps))
