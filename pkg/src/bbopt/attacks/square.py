"""Random-search attack flipping square patches to the ball surface.

Every candidate keeps the perturbation at the full l-infinity radius: patches
are set to original ± eps, never something in between. A candidate is kept
only when its loss does not increase, so the best-so-far loss is
non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datasets import LabeledImage
from ..oracle import BudgetExhausted, LossKind, Oracle, QueryLedger
from ..rng import RngStream
from ..schedule import PSchedule, default_schedule, p_at, square_side
from ..tensors import ImageTensor, project_linf_array
from .common import AttackResult, clean_check, probe, resolve_loss

__all__ = ["SquareConfig", "square_init", "square_sample_delta", "square_attack_linf"]


@dataclass(frozen=True)
class SquareConfig:
    p_schedule: PSchedule = field(default_factory=default_schedule)
    k_squares: int = 1
    strict_improve: bool = False

    def __post_init__(self) -> None:
        if self.k_squares < 1:
            raise ValueError(f"k_squares must be >= 1, got {self.k_squares}")


def square_init(x: ImageTensor, eps: float, rng: RngStream) -> ImageTensor:
    """Vertical ±eps stripes: one sign per (channel, column), then projected."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    arr = x.data.astype(np.float64)
    c, _, w = arr.shape
    signs = rng.signs((c, 1, w))
    return ImageTensor(project_linf_array(arr + eps * signs, arr, eps))


def square_sample_delta(eps: float, h: int, x_hat: ImageTensor, x: ImageTensor,
                        k_squares: int, rng: RngStream) -> ImageTensor:
    """Candidate with k h-by-h windows re-set to x ± eps (one sign per window and channel).

    Windows are drawn uniformly and may overlap; pixels outside every window
    keep their x_hat values. The result is projected back onto the ball ∩ box.
    """
    if k_squares < 1:
        raise ValueError(f"k_squares must be >= 1, got {k_squares}")
    c, height, width = x.data.shape
    if not 1 <= h <= min(height, width):
        raise ValueError(f"square side {h} outside [1, {min(height, width)}]")
    arr = x.data.astype(np.float64)
    cand = x_hat.data.astype(np.float64).copy()
    for _ in range(k_squares):
        r = int(rng.integers(0, height - h + 1))
        col = int(rng.integers(0, width - h + 1))
        signs = rng.signs((c, 1, 1))
        cand[:, r:r + h, col:col + h] = arr[:, r:r + h, col:col + h] + eps * signs
    return ImageTensor(project_linf_array(cand, arr, eps))


def square_attack_linf(oracle: Oracle, item: LabeledImage, eps: float, budget: int,
                       cfg: SquareConfig, rng: RngStream,
                       loss: LossKind = LossKind.MARGIN,
                       accepted_losses: list | None = None) -> AttackResult:
    """Random search over square patches, accepting non-worsening candidates.

    ``accepted_losses`` (when given) collects the best-so-far loss after the
    init query and after every acceptance.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    loss_fn = resolve_loss(loss)
    ledger = QueryLedger(budget)

    done, clean_loss = clean_check(oracle, item, ledger, loss_fn)
    if done is not None:
        return done

    side = item.image.side
    sched = cfg.p_schedule
    x_hat, l_star = item.image, clean_loss
    iterations = 0
    try:
        init = square_init(item.image, eps, rng)
        l_init, adv = probe(oracle, init.data, item.label, ledger, loss_fn)
        if adv:
            return AttackResult(True, ledger.used, 0, init, l_init)
        # the init is the starting point regardless of how it compares to clean
        x_hat, l_star = init, l_init
        if accepted_losses is not None:
            accepted_losses.append(l_star)
        for i in range(1, sched.n_total):
            h = square_side(p_at(sched, i), side)
            cand = square_sample_delta(eps, h, x_hat, item.image, cfg.k_squares, rng)
            l_new, adv = probe(oracle, cand.data, item.label, ledger, loss_fn)
            iterations = i
            if adv:
                return AttackResult(True, ledger.used, iterations, cand, l_new)
            improved = l_new < l_star if cfg.strict_improve else l_new <= l_star
            if improved:
                x_hat, l_star = cand, l_new
                if accepted_losses is not None:
                    accepted_losses.append(l_star)
    except BudgetExhausted:
        pass
    return AttackResult(False, ledger.used, iterations, x_hat, l_star)
