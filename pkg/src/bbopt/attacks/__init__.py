"""The four attacks behind one interface: run(oracle, item, eps, budget, cfg, rng)."""

from __future__ import annotations

from ..datasets import LabeledImage
from ..oracle import LossKind, Oracle
from ..rng import RngStream
from ..schedule import default_schedule
from .bandits import BanditsConfig, bandits_attack, bandits_grad_est, default_bandits_config
from .common import AttackResult
from .nes import NesConfig, nes_attack, nes_gradient_estimate
from .square import SquareConfig, square_attack_linf, square_init, square_sample_delta
from .zo_signsgd import ZoSignConfig, zo_sign_gradient_estimate, zo_signsgd_attack

__all__ = [
    "AttackResult",
    "ATTACK_IDS",
    "run_attack",
    "default_config",
    "NesConfig",
    "nes_attack",
    "nes_gradient_estimate",
    "BanditsConfig",
    "bandits_attack",
    "bandits_grad_est",
    "default_bandits_config",
    "ZoSignConfig",
    "zo_signsgd_attack",
    "zo_sign_gradient_estimate",
    "SquareConfig",
    "square_attack_linf",
    "square_init",
    "square_sample_delta",
]

_RUNNERS = {
    "bandits": bandits_attack,
    "nes": nes_attack,
    "square": square_attack_linf,
    "zosignsgd": zo_signsgd_attack,
}

ATTACK_IDS = tuple(sorted(_RUNNERS))


def default_config(attack: str, image_side: int, budget: int):
    """Stock hyperparameters for an attack, sized to the image and budget."""
    if attack == "nes":
        return NesConfig()
    if attack == "zosignsgd":
        return ZoSignConfig()
    if attack == "bandits":
        return default_bandits_config(image_side)
    if attack == "square":
        return SquareConfig(p_schedule=default_schedule(n_total=budget))
    raise ValueError(f"unknown attack {attack!r}")


def run_attack(attack: str, oracle: Oracle, item: LabeledImage, eps: float, budget: int,
               cfg, rng: RngStream, loss: LossKind = LossKind.MARGIN) -> AttackResult:
    try:
        runner = _RUNNERS[attack]
    except KeyError:
        raise ValueError(f"unknown attack {attack!r}") from None
    return runner(oracle, item, eps, budget, cfg, rng, loss=loss)
