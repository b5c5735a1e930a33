"""Shared attack plumbing: results, probes, and the feasible-query helper."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..datasets import LabeledImage
from ..oracle import (
    LossKind,
    Oracle,
    QueryLedger,
    is_adversarial_untargeted,
    objective_fn,
    query_logits,
)
from ..tensors import ImageTensor, project_linf_array

__all__ = ["AttackResult", "probe", "clean_check", "make_projector"]

LossFn = Callable[[np.ndarray, int], float]


@dataclass
class AttackResult:
    success: bool
    queries: int
    iterations: int
    final_image: ImageTensor
    final_loss: float


def probe(oracle: Oracle, arr: np.ndarray, y: int, ledger: QueryLedger,
          loss_fn: LossFn) -> tuple[float, bool]:
    """One counted query; returns (objective value, adversarial?)."""
    logits = query_logits(oracle, ImageTensor(arr), ledger)
    return loss_fn(logits, y), is_adversarial_untargeted(logits, y)


def make_projector(x_orig: np.ndarray, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """Projection onto the eps-ball around x_orig intersected with [0,1]^d.

    Every point an attack sends to the oracle, including estimator probe
    points, goes through this so the feasibility invariant holds for all
    queries, not just accepted iterates.
    """
    return lambda a: project_linf_array(a, x_orig, eps)


def clean_check(oracle: Oracle, item: LabeledImage, ledger: QueryLedger,
                loss_fn: LossFn) -> tuple[AttackResult | None, float]:
    """Query the clean input (counted). Returns an immediate-success result
    when it is already misclassified, else (None, clean loss)."""
    loss, adv = probe(oracle, item.image.data, item.label, ledger, loss_fn)
    if adv:
        return AttackResult(True, ledger.used, 0, item.image, loss), loss
    return None, loss


def resolve_loss(loss: LossKind | LossFn) -> LossFn:
    if isinstance(loss, LossKind):
        return objective_fn(loss)
    return loss
