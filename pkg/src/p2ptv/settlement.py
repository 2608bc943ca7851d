"""Provider profit under P2PTV and unicast delivery, and the percentage gain between them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class UndefinedGainError(ZeroDivisionError):
    """Unicast profit is zero, so a percentage gain has no meaning."""


@dataclass(frozen=True)
class TrialResult:
    p2ptv_profit: float
    unicast_profit: float
    incentives_paid: float
    gain_pct: float  # nan when flagged
    rounds_used: int
    seed: int
    flagged: bool = False

    FIELDS = ("seed", "rounds_used", "p2ptv_profit", "unicast_profit", "incentives_paid", "gain_pct", "flagged")

    def as_row(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass(frozen=True)
class Ledger:
    """Money flows of one simulated arm, as seen by the provider."""

    content_revenue: float
    network_margin: float
    origin_cost: float
    incentives: float

    @property
    def profit(self) -> float:
        return self.content_revenue + self.network_margin - self.origin_cost - self.incentives


def incentive_payout(programs_served, rate: float):
    if rate < 0:
        raise ValueError("incentive rate must be non-negative")
    return programs_served * rate


def settle(prices_paid, network_charges, from_origin, programs_served, *, margin: float,
           server_cost: float, incentive_rate: float) -> Ledger:
    """Aggregate the provider ledger over the assigned viewers of one arm.

    ``prices_paid``, ``network_charges`` and ``from_origin`` hold one entry per
    assigned viewer; ``programs_served`` holds one counter per agent.
    """
    prices_paid = np.asarray(prices_paid, dtype=float)
    network_charges = np.asarray(network_charges, dtype=float)
    n_origin = int(np.count_nonzero(from_origin))
    incentives = float(np.sum(incentive_payout(np.asarray(programs_served, dtype=float), incentive_rate)))
    return Ledger(
        content_revenue=float(prices_paid.sum()),
        network_margin=float(margin * network_charges.sum()),
        origin_cost=server_cost * n_origin,
        incentives=incentives,
    )


def compute_p2ptv_profit(state, agents, network, *, margin: float, server_cost: float,
                         incentive_rate: float) -> Ledger:
    """Ledger of a finished arm: each assigned viewer pays the content price quoted at
    their last visit plus the network charge of their final delivery path."""
    deliveries = network.deliveries(state)
    return settle(
        [agents[user].quoted_price for user, _, _, _ in deliveries],
        [charge for _, _, _, charge in deliveries],
        [server is None for _, _, server, _ in deliveries],
        [a.programs_served for a in agents],
        margin=margin,
        server_cost=server_cost,
        incentive_rate=incentive_rate,
    )


def compute_unicast_profit(state, agents, network, *, margin: float, server_cost: float) -> Ledger:
    """Same accounting with every delivery from the origin and no incentives."""
    return compute_p2ptv_profit(state, agents, network.without_peers(), margin=margin,
                                server_cost=server_cost, incentive_rate=0.0)


def profit_gain_pct(p2ptv: float, unicast: float) -> float:
    if unicast == 0:
        raise UndefinedGainError("unicast profit is zero")
    return 100.0 * (p2ptv - unicast) / abs(unicast)


def make_result(p2ptv: Ledger, unicast: Ledger, rounds_used: int, seed: int) -> TrialResult:
    try:
        gain = profit_gain_pct(p2ptv.profit, unicast.profit)
        flagged = False
    except UndefinedGainError:
        gain, flagged = math.nan, True
    return TrialResult(
        p2ptv_profit=p2ptv.profit,
        unicast_profit=unicast.profit,
        incentives_paid=p2ptv.incentives,
        gain_pct=gain,
        rounds_used=rounds_used,
        seed=seed,
        flagged=flagged,
    )
