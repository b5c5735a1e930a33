"""Square-size rule and the piecewise-constant p-halving schedules.

p is the fraction of pixels a square modifies; it starts at p0 and is halved
at fixed iteration indices. The square side is the closest positive integer
to sqrt(p) * omega, floored at 1 and capped at omega.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

__all__ = [
    "PSchedule",
    "square_side",
    "p_at",
    "rescale_indices",
    "default_schedule",
    "L1",
    "L2",
    "L3",
    "NAMED_LISTS",
    "BASE_ITERATIONS",
]

# Halving-index lists for a 10000-iteration budget. L1 is the original
# schedule; L2 is front-loaded, L3 a small perturbation of L1.
L1 = (10, 50, 200, 500, 1000, 2000, 4000, 6000, 8000)
L2 = (10, 20, 50, 100, 200, 500, 1000, 3000, 6000)
L3 = (5, 40, 150, 400, 800, 1600, 2500, 4500, 8000)
NAMED_LISTS = {"L1": L1, "L2": L2, "L3": L3}
BASE_ITERATIONS = 10000


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PSchedule:
    """Initial fraction p0 halved at each index in halving_indices, over n_total iterations.

    Duplicate indices are legal (rescaling can collide them) and each still
    counts one halving.
    """

    p0: float
    halving_indices: tuple[int, ...]
    n_total: int

    def __post_init__(self) -> None:
        if not 0.0 < self.p0 <= 1.0:
            raise ValueError(f"p0 must be in (0, 1], got {self.p0}")
        if self.n_total < 1:
            raise ValueError(f"n_total must be positive, got {self.n_total}")
        idx = tuple(int(i) for i in self.halving_indices)
        if any(i < 1 for i in idx):
            raise ValueError(f"halving indices must be positive, got {idx}")
        if any(b < a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"halving indices must be non-decreasing, got {idx}")
        object.__setattr__(self, "halving_indices", idx)


def square_side(p: float, omega: int) -> int:
    """Side h = round(sqrt(p) * omega), half-up, clamped into [1, omega]."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    if omega < 1:
        raise ValueError(f"omega must be >= 1, got {omega}")
    h = _round_half_up(math.sqrt(p) * omega)
    return max(1, min(h, omega))


def p_at(schedule: PSchedule, i: int) -> float:
    """p0 halved once for each halving index <= i."""
    if not 0 <= i < schedule.n_total:
        raise ValueError(f"iteration {i} outside [0, {schedule.n_total})")
    halvings = bisect.bisect_right(schedule.halving_indices, i)
    return schedule.p0 * 2.0 ** (-halvings)


def rescale_indices(base: list[int] | tuple[int, ...], base_n: int, n: int) -> list[int]:
    """Map a halving list written for base_n iterations onto n iterations.

    Each index scales by n/base_n (half-up, floored at 1). Collisions are kept
    as duplicates so the total number of halvings is preserved.
    """
    if base_n < 1 or n < 1:
        raise ValueError("iteration counts must be positive")
    return [max(1, _round_half_up(i * n / base_n)) for i in base]


def default_schedule(p0: float = 0.05, n_total: int = BASE_ITERATIONS,
                     indices: tuple[int, ...] | None = None) -> PSchedule:
    """The stock schedule: L1 rescaled to the given iteration budget."""
    if indices is None:
        indices = tuple(rescale_indices(L1, BASE_ITERATIONS, n_total))
    return PSchedule(p0=p0, halving_indices=tuple(indices), n_total=n_total)
