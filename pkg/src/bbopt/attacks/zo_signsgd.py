"""Zeroth-order sign descent: central differences over random sphere directions.

Each iteration estimates the gradient from b uniform unit-sphere directions
(scaled by the dimension d), then steps by -step_size * sign(estimate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import LabeledImage
from ..oracle import BudgetExhausted, LossKind, Oracle, QueryLedger
from ..rng import RngStream
from ..tensors import ImageTensor
from .common import AttackResult, clean_check, make_projector, probe, resolve_loss

__all__ = ["ZoSignConfig", "zo_sign_gradient_estimate", "zo_signsgd_attack"]


@dataclass(frozen=True)
class ZoSignConfig:
    n_directions: int = 20
    mu: float = 0.005
    step_size: float = 0.005
    central: bool = True  # False = forward differences (b + 1 queries)

    def __post_init__(self) -> None:
        if self.n_directions < 1:
            raise ValueError(f"n_directions must be positive, got {self.n_directions}")
        if self.mu <= 0 or self.step_size <= 0:
            raise ValueError("mu and step_size must be positive")


def _sphere_direction(rng: RngStream, shape) -> np.ndarray:
    while True:
        v = rng.standard_normal(shape)
        n = np.linalg.norm(v)
        if n > 0:
            return v / n


def zo_sign_gradient_estimate(oracle: Oracle, x: np.ndarray, y: int, cfg: ZoSignConfig,
                              ledger: QueryLedger, rng: RngStream,
                              loss: LossKind = LossKind.MARGIN,
                              project=None) -> np.ndarray:
    """g = (d / (2 b mu)) * sum_j (L(x + mu u_j) - L(x - mu u_j)) u_j.

    Consumes 2b queries (central) or b + 1 (forward). ``project`` keeps probe
    points feasible when the estimate runs inside an attack.
    """
    loss_fn = resolve_loss(loss)
    if project is None:
        project = lambda a: a
    d = x.size
    b = cfg.n_directions
    mu = cfg.mu
    g = np.zeros(x.shape, dtype=np.float64)
    if cfg.central:
        for _ in range(b):
            u = _sphere_direction(rng, x.shape)
            l_plus, _ = probe(oracle, project(x + mu * u), y, ledger, loss_fn)
            l_minus, _ = probe(oracle, project(x - mu * u), y, ledger, loss_fn)
            g += (l_plus - l_minus) * u
        return g * (d / (2.0 * b * mu))
    base, _ = probe(oracle, project(x), y, ledger, loss_fn)
    for _ in range(b):
        u = _sphere_direction(rng, x.shape)
        l_u, _ = probe(oracle, project(x + mu * u), y, ledger, loss_fn)
        g += (l_u - base) * u
    return g * (d / (b * mu))


def zo_signsgd_attack(oracle: Oracle, item: LabeledImage, eps: float, budget: int,
                      cfg: ZoSignConfig, rng: RngStream,
                      loss: LossKind = LossKind.MARGIN) -> AttackResult:
    """x <- project(x - step_size * sign(g)) until adversarial or out of budget."""
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
            g = zo_sign_gradient_estimate(oracle, x, item.label, cfg, ledger, rng,
                                          loss=loss_fn, project=project)
            x = project(x - cfg.step_size * np.sign(g)).astype(np.float64)
            iterations += 1
            cur_loss, adv = probe(oracle, x, item.label, ledger, loss_fn)
            if adv:
                return AttackResult(True, ledger.used, iterations, ImageTensor(project(x)), cur_loss)
    except BudgetExhausted:
        pass
    return AttackResult(False, ledger.used, iterations, ImageTensor(project(x)), cur_loss)
