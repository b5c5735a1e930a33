"""The black-box boundary: query accounting, losses, and the builtin MLP oracle.

An oracle is anything with a ``logits(image) -> array`` method, a
``num_classes`` attribute and a ``serial`` flag (True when concurrent queries
are unsafe). Attacks never call ``logits`` directly; they go through
``query_logits`` so every forward pass is charged to a ledger.
"""

from __future__ import annotations

import enum
import struct
from typing import Callable, Protocol

import numpy as np

from .tensors import ImageTensor

__all__ = [
    "BudgetExhausted",
    "OracleUnavailable",
    "ModelFormatError",
    "Oracle",
    "QueryLedger",
    "LossKind",
    "query_logits",
    "margin_loss",
    "cross_entropy_loss",
    "is_adversarial_untargeted",
    "objective_fn",
    "MlpOracle",
    "load_builtin_model",
    "save_builtin_model",
]


class BudgetExhausted(Exception):
    """Raised when a query is attempted with no budget left."""


class OracleUnavailable(Exception):
    """Remote oracle transport or protocol failure."""


class ModelFormatError(ValueError):
    """Malformed BBAM model file."""


class Oracle(Protocol):
    num_classes: int | None
    serial: bool

    def logits(self, image: ImageTensor) -> np.ndarray: ...


class QueryLedger:
    """Exact count of forward passes against a hard budget.

    ``used`` never decreases and never exceeds ``budget``; ``charge`` refuses
    the query (raises BudgetExhausted) rather than letting it through.
    """

    def __init__(self, budget: int = 10000) -> None:
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.budget = int(budget)
        self._used = 0

    @property
    def used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int:
        return self.budget - self._used

    def charge(self) -> None:
        if self._used >= self.budget:
            raise BudgetExhausted(f"query budget of {self.budget} exhausted")
        self._used += 1


def query_logits(model: Oracle, image: ImageTensor, ledger: QueryLedger) -> np.ndarray:
    """One counted forward pass. Raises BudgetExhausted before touching the model."""
    ledger.charge()
    out = np.asarray(model.logits(image), dtype=np.float64)
    return out


def _check_label(logits: np.ndarray, y: int) -> None:
    k = logits.shape[0]
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    if not 0 <= y < k:
        raise ValueError(f"label {y} out of range for {k} classes")


def margin_loss(logits: np.ndarray, y: int) -> float:
    """scores[y] minus the best other score; negative exactly when fooled."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_label(logits, y)
    others = np.delete(logits, y)
    return float(logits[y] - np.max(others))


def cross_entropy_loss(logits: np.ndarray, y: int) -> float:
    """-log softmax(logits)[y], max-shifted so huge logits don't overflow."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_label(logits, y)
    m = float(np.max(logits))
    return float(m - logits[y] + np.log(np.sum(np.exp(logits - m))))


def is_adversarial_untargeted(logits: np.ndarray, y: int) -> bool:
    """True iff the argmax leaves class y. Ties go to the lowest index."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_label(logits, y)
    return int(np.argmax(logits)) != y


class LossKind(enum.Enum):
    MARGIN = "margin"
    XENT = "xent"


def objective_fn(kind: LossKind) -> Callable[[np.ndarray, int], float]:
    """The scalar objective every attack minimizes.

    Margin loss is minimized as-is (negative = success). Cross-entropy is
    negated, since an untargeted attack wants the true-class probability down.
    """
    if kind is LossKind.MARGIN:
        return margin_loss
    if kind is LossKind.XENT:
        return lambda logits, y: -cross_entropy_loss(logits, y)
    raise ValueError(f"unknown loss kind {kind!r}")


class MlpOracle:
    """Dense-layer network: flatten -> (dense -> optional ReLU)* -> dense.

    Weights are stored float32, the forward pass accumulates in float64.
    Pure numpy, so concurrent queries are fine.
    """

    serial = False

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray, bool]]) -> None:
        if not layers:
            raise ValueError("need at least one layer")
        checked = []
        prev_out = None
        for i, (w, b, relu) in enumerate(layers):
            w = np.asarray(w, dtype=np.float32)
            b = np.asarray(b, dtype=np.float32)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: bad shapes W{w.shape} b{b.shape}")
            if prev_out is not None and w.shape[1] != prev_out:
                raise ValueError(
                    f"layer {i}: in_dim {w.shape[1]} does not match previous out_dim {prev_out}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite weights")
            prev_out = w.shape[0]
            checked.append((w, b, bool(relu)))
        self.layers = checked
        self.input_dim = checked[0][0].shape[1]
        self.num_classes = prev_out

    def logits(self, image: ImageTensor) -> np.ndarray:
        x = image.data.reshape(-1).astype(np.float64)
        if x.shape[0] != self.input_dim:
            raise ValueError(f"image has {x.shape[0]} pixels, model wants {self.input_dim}")
        for w, b, relu in self.layers:
            x = w.astype(np.float64) @ x + b.astype(np.float64)
            if relu:
                x = np.maximum(x, 0.0)
        return x


_BBAM_MAGIC = b"BBAM"
_MAX_DIM = 1 << 24  # sanity cap on layer dimensions


def load_builtin_model(path) -> MlpOracle:
    """Load a BBAM model file; errors name the offending byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()

    off = 0

    def take(fmt: str):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise ModelFormatError(f"truncated file at byte {off}: need {size} more bytes")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    magic = blob[:4]
    if magic != _BBAM_MAGIC:
        raise ModelFormatError(f"bad magic {magic!r} at byte 0")
    off = 4
    (version,) = take("<I")
    if version != 1:
        raise ModelFormatError(f"unsupported version {version} at byte 4")
    (layer_count,) = take("<I")
    if not 1 <= layer_count <= 1024:
        raise ModelFormatError(f"implausible layer count {layer_count} at byte 8")

    layers = []
    for i in range(layer_count):
        hdr_off = off
        in_dim, out_dim, relu_flag = take("<IIB")
        if not (1 <= in_dim <= _MAX_DIM and 1 <= out_dim <= _MAX_DIM):
            raise ModelFormatError(f"layer {i}: bad dims {in_dim}x{out_dim} at byte {hdr_off}")
        if relu_flag not in (0, 1):
            raise ModelFormatError(f"layer {i}: bad relu flag {relu_flag} at byte {hdr_off + 8}")
        w_off = off
        n_w = in_dim * out_dim
        w = np.frombuffer(blob, dtype="<f4", count=n_w, offset=off) if off + 4 * n_w <= len(blob) else None
        if w is None:
            raise ModelFormatError(f"layer {i}: truncated weights at byte {w_off}")
        off += 4 * n_w
        if off + 4 * out_dim > len(blob):
            raise ModelFormatError(f"layer {i}: truncated bias at byte {off}")
        b = np.frombuffer(blob, dtype="<f4", count=out_dim, offset=off)
        off += 4 * out_dim
        if not np.isfinite(w).all() or not np.isfinite(b).all():
            raise ModelFormatError(f"layer {i}: non-finite weights at byte {w_off}")
        layers.append((w.reshape(out_dim, in_dim).copy(), b.copy(), bool(relu_flag)))

    if off != len(blob):
        raise ModelFormatError(f"{len(blob) - off} trailing bytes at byte {off}")
    try:
        return MlpOracle(layers)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc


def save_builtin_model(path, layers: list[tuple[np.ndarray, np.ndarray, bool]]) -> None:
    """Write a BBAM model file (fixture generation and tests)."""
    out = bytearray()
    out += _BBAM_MAGIC
    out += struct.pack("<II", 1, len(layers))
    for w, b, relu in layers:
        w = np.asarray(w, dtype="<f4")
        b = np.asarray(b, dtype="<f4")
        out_dim, in_dim = w.shape
        out += struct.pack("<IIB", in_dim, out_dim, 1 if relu else 0)
        out += w.tobytes()
        out += b.tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))
