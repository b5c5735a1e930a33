"""Gaussian-smoothing gradient estimation with sign-step descent.

The search distribution is an isotropic Gaussian of scale sigma around the
current iterate. The natural-gradient correction for that family is a
constant rescaling, so it is absorbed into step_size rather than kept as an
explicit Fisher matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import LabeledImage
from ..oracle import BudgetExhausted, LossKind, Oracle, QueryLedger
from ..rng import RngStream
from ..tensors import ImageTensor
from .common import AttackResult, clean_check, make_projector, probe, resolve_loss

__all__ = ["NesConfig", "nes_gradient_estimate", "nes_attack"]


@dataclass(frozen=True)
class NesConfig:
    n_samples: int = 50
    sigma: float = 0.001
    step_size: float = 0.01
    antithetic: bool = True

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be positive, got {self.n_samples}")
        if self.antithetic and self.n_samples % 2 != 0:
            raise ValueError("antithetic sampling needs an even n_samples")
        if self.sigma <= 0 or self.step_size <= 0:
            raise ValueError("sigma and step_size must be positive")


def nes_gradient_estimate(oracle: Oracle, x: np.ndarray, y: int, cfg: NesConfig,
                          ledger: QueryLedger, rng: RngStream,
                          loss: LossKind = LossKind.MARGIN,
                          project=None) -> np.ndarray:
    """Estimate the objective gradient at x with n_samples queries.

    Antithetic mode pairs each Gaussian direction u with -u so symmetric
    noise cancels exactly; a constant objective yields an exactly zero
    estimate. ``project`` (when given) maps each probe point back into the
    feasible set before it is queried.
    """
    loss_fn = resolve_loss(loss)
    if project is None:
        project = lambda a: a
    g = np.zeros(x.shape, dtype=np.float64)
    sigma = cfg.sigma
    if cfg.antithetic:
        for _ in range(cfg.n_samples // 2):
            u = rng.standard_normal(x.shape)
            l_plus, _ = probe(oracle, project(x + sigma * u), y, ledger, loss_fn)
            l_minus, _ = probe(oracle, project(x - sigma * u), y, ledger, loss_fn)
            g += (l_plus - l_minus) * u
    else:
        for _ in range(cfg.n_samples):
            u = rng.standard_normal(x.shape)
            l_u, _ = probe(oracle, project(x + sigma * u), y, ledger, loss_fn)
            g += l_u * u
    return g / (cfg.n_samples * sigma)


def nes_attack(oracle: Oracle, item: LabeledImage, eps: float, budget: int,
               cfg: NesConfig, rng: RngStream,
               loss: LossKind = LossKind.MARGIN) -> AttackResult:
    """Sign-step descent along the smoothed gradient, projected each iteration."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    loss_fn = resolve_loss(loss)
    ledger = QueryLedger(budget)

    done, cur_loss = clean_check(oracle, item, ledger, loss_fn)
    if done is not None:
        return done

    x0 = item.image.data.astype(np.float64)
    project = make_projector(x0, eps)
    x = x0.copy()
    iterations = 0
    try:
        while True:
            g = nes_gradient_estimate(oracle, x, item.label, cfg, ledger, rng,
                                      loss=loss_fn, project=project)
            x = project(x - cfg.step_size * np.sign(g)).astype(np.float64)
            iterations += 1
            cur_loss, adv = probe(oracle, x, item.label, ledger, loss_fn)
            if adv:
                return AttackResult(True, ledger.used, iterations, ImageTensor(project(x)), cur_loss)
    except BudgetExhausted:
        pass
    return AttackResult(False, ledger.used, iterations, ImageTensor(project(x)), cur_loss)
