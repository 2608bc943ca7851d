"""Two-tier directional price learner: small steps within a round, large steps between rounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepPolicy:
    micro_step: float
    macro_step: float
    price_floor: float = 0.0
    relative_gap: bool = True

    def __post_init__(self):
        if not 0 < self.micro_step < self.macro_step:
            raise ValueError(
                f"need 0 < micro_step < macro_step, got {self.micro_step} and {self.macro_step}"
            )


def micro_adjust(price: float, current_demand: float, target: float, policy: StepPolicy) -> float:
    if current_demand > target:
        price = price + policy.micro_step
    elif current_demand < target:
        price = price - policy.micro_step
    return max(price, policy.price_floor)


def macro_adjust(prices, round_demand, targets, policy: StepPolicy) -> np.ndarray:
    """Move every price by ``macro_step * sign(gap)``, scaled by the relative gap capped at 1.

    With ``policy.relative_gap`` off, each program moves by a plain sign step.
    """
    prices = np.asarray(prices, dtype=float)
    gap = np.asarray(round_demand, dtype=float) - np.asarray(targets, dtype=float)
    if not prices.shape == gap.shape:
        raise ValueError("prices, demands and targets must have equal length")
    scale = np.ones_like(gap)
    if policy.relative_gap:
        scale = np.minimum(1.0, np.abs(gap) / np.maximum(np.asarray(targets, dtype=float), 1.0))
    return np.maximum(prices + policy.macro_step * np.sign(gap) * scale, policy.price_floor)


def derive_targets(d_max, m: int) -> np.ndarray:
    """Split the population across programs in proportion to max demand, capped at each max."""
    d_max = np.asarray(d_max, dtype=float)
    total = d_max.sum()
    if total <= 0:
        return np.zeros_like(d_max)
    return np.minimum(d_max, m * d_max / total)
