"""Query-budgeted black-box adversarial attack toolkit."""

from .tensors import ImageTensor, clamp01, linf_distance, project_linf
from .rng import RngStream
from .oracle import (
    BudgetExhausted,
    LossKind,
    MlpOracle,
    OracleUnavailable,
    QueryLedger,
    cross_entropy_loss,
    is_adversarial_untargeted,
    load_builtin_model,
    margin_loss,
    query_logits,
)
from .datasets import Dataset, LabeledImage, load_dataset
from .remote import RemoteOracle, healthcheck, remote_oracle
from .schedule import L1, L2, L3, PSchedule, p_at, rescale_indices, square_side
from .attacks import (
    AttackResult,
    BanditsConfig,
    NesConfig,
    SquareConfig,
    ZoSignConfig,
    bandits_attack,
    nes_attack,
    run_attack,
    square_attack_linf,
    zo_signsgd_attack,
)

__version__ = "0.1.0"
