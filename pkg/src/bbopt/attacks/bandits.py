"""Bandit-style attack with a persistent low-resolution latent prior.

A latent tensor v at reduced spatial resolution carries gradient information
across rounds (the time prior) and, through nearest-neighbor upsampling,
across nearby pixels (the data prior). Each round spends two queries on a
latent-space two-point estimate, updates v by gradient ascent, and moves the
image one projected sign step along the upsampled latent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import LabeledImage
from ..oracle import BudgetExhausted, LossKind, Oracle, QueryLedger
from ..rng import RngStream
from ..tensors import ImageTensor
from .common import AttackResult, clean_check, make_projector, probe, resolve_loss

__all__ = ["BanditsConfig", "bandits_grad_est", "bandits_attack", "upsample_nn"]


@dataclass(frozen=True)
class BanditsConfig:
    prior_size: int = 4
    exploration: float = 0.01
    fd_eta: float = 0.1
    prior_step: float = 1.0
    image_step: float = 0.01

    def __post_init__(self) -> None:
        for name in ("prior_size", "exploration", "fd_eta", "image_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        # prior_step 0 is allowed: it freezes the latent at v0 = 0, which
        # (with sign(0) = 0) leaves the image untouched forever
        if self.prior_step < 0:
            raise ValueError("prior_step must be non-negative")


def default_bandits_config(image_side: int) -> BanditsConfig:
    prior = max(1, image_side // 2)
    image_step = 0.01
    return BanditsConfig(prior_size=prior, exploration=0.01, fd_eta=0.1,
                         prior_step=100.0 * image_step, image_step=image_step)


def upsample_nn(v: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor upsample of a (c, s, s) latent to (c, height, width)."""
    s = v.shape[-1]
    rows = (np.arange(height) * s) // height
    cols = (np.arange(width) * s) // width
    return v[:, rows][:, :, cols]


def _up_unit(v: np.ndarray, height: int, width: int) -> np.ndarray:
    """Upsample then normalize to unit max magnitude (no-op on an all-zero latent)."""
    u = upsample_nn(v, height, width)
    m = np.max(np.abs(u))
    return u / m if m > 0 else u


def bandits_grad_est(oracle: Oracle, x: np.ndarray, y: int, v: np.ndarray,
                     cfg: BanditsConfig, ledger: QueryLedger, rng: RngStream,
                     loss: LossKind = LossKind.MARGIN,
                     project=None) -> np.ndarray:
    """Latent-space two-point estimate around the carried prior v (2 queries)."""
    loss_fn = resolve_loss(loss)
    if project is None:
        project = lambda a: a
    _, height, width = x.shape
    u = rng.standard_normal(v.shape)
    delta = cfg.exploration
    q_plus = project(x + cfg.fd_eta * _up_unit(v + delta * u, height, width))
    q_minus = project(x + cfg.fd_eta * _up_unit(v - delta * u, height, width))
    l_plus, _ = probe(oracle, q_plus, y, ledger, loss_fn)
    l_minus, _ = probe(oracle, q_minus, y, ledger, loss_fn)
    return (l_plus - l_minus) / (2.0 * delta * cfg.fd_eta) * u


def bandits_attack(oracle: Oracle, item: LabeledImage, eps: float, budget: int,
                   cfg: BanditsConfig, rng: RngStream,
                   loss: LossKind = LossKind.MARGIN) -> AttackResult:
    """Per round: estimate, latent gradient-ascent update, projected sign step (3 queries)."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    loss_fn = resolve_loss(loss)
    ledger = QueryLedger(budget)

    done, cur_loss = clean_check(oracle, item, ledger, loss_fn)
    if done is not None:
        return done

    c, height, width = item.image.data.shape
    if cfg.prior_size > min(height, width):
        raise ValueError(
            f"prior_size {cfg.prior_size} exceeds image side {min(height, width)}"
        )
    x0 = item.image.data.astype(np.float64)
    project = make_projector(x0, eps)
    x = x0.copy()
    v = np.zeros((c, cfg.prior_size, cfg.prior_size), dtype=np.float64)
    iterations = 0
    try:
        while True:
            delta_t = bandits_grad_est(oracle, x, item.label, v, cfg, ledger, rng,
                                       loss=loss_fn, project=project)
            # normalized ascent: the raw estimate's scale collapses once the
            # latent leaves zero (the unit-max upsample shrinks later
            # two-point differences), which would freeze v on its first
            # draw; normalizing keeps every round's contribution comparable
            m = np.max(np.abs(delta_t))
            if m > 0:
                v = v + cfg.prior_step * (delta_t / m)
            # sign(0) = 0: a still-zero latent leaves the image untouched
            x = project(x - cfg.image_step * np.sign(upsample_nn(v, height, width))).astype(np.float64)
            iterations += 1
            cur_loss, adv = probe(oracle, x, item.label, ledger, loss_fn)
            if adv:
                return AttackResult(True, ledger.used, iterations, ImageTensor(project(x)), cur_loss)
    except BudgetExhausted:
        pass
    return AttackResult(False, ledger.used, iterations, ImageTensor(project(x)), cur_loss)
