"""Viewer agents revisiting the provider's prices round after round."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .pricing import StepPolicy, macro_adjust, micro_adjust
from .topology import LinkCostModel, Topology, link_cost


@dataclass
class UserAgent:
    id: int
    wtp: np.ndarray
    selection: Optional[int] = None
    programs_served: int = 0
    quoted_price: float = 0.0

    def credit_service(self):
        self.programs_served += 1


@dataclass
class MarketState:
    prices: np.ndarray
    observed_demand: np.ndarray
    target_popularity: np.ndarray
    total_rounds: int
    round_index: int = 0
    # members[i, u] is True when user u is assigned to program i
    members: np.ndarray = None
    # join order of each user into its current program, -1 when unassigned
    join_seq: np.ndarray = None
    next_seq: int = 0
    trace: Optional[list] = None  # (round, program, price, demand) rows when enabled

    @classmethod
    def initial(cls, prices, targets, num_users: int, total_rounds: int, trace: bool = False) -> "MarketState":
        prices = np.array(prices, dtype=float)
        return cls(
            prices=prices,
            observed_demand=np.zeros(len(prices), dtype=int),
            target_popularity=np.asarray(targets, dtype=float),
            total_rounds=total_rounds,
            members=np.zeros((len(prices), num_users), dtype=bool),
            join_seq=np.full(num_users, -1, dtype=np.int64),
            trace=[] if trace else None,
        )

    @property
    def assignments(self) -> dict[int, int]:
        prog, users = np.nonzero(self.members)
        return {int(u): int(p) for p, u in sorted(zip(prog, users), key=lambda t: t[1])}

    def recount_ok(self) -> bool:
        return bool(np.array_equal(self.members.sum(axis=1), self.observed_demand))

    def join(self, user: int, program: int):
        self.members[program, user] = True
        self.observed_demand[program] += 1
        self.join_seq[user] = self.next_seq
        self.next_seq += 1

    def leave(self, user: int, program: int):
        self.members[program, user] = False
        self.observed_demand[program] -= 1
        self.join_seq[user] = -1

    def copy(self) -> "MarketState":
        return MarketState(
            prices=self.prices.copy(),
            observed_demand=self.observed_demand.copy(),
            target_popularity=self.target_popularity.copy(),
            total_rounds=self.total_rounds,
            round_index=self.round_index,
            members=self.members.copy(),
            join_seq=self.join_seq.copy(),
            next_seq=self.next_seq,
            trace=None if self.trace is None else list(self.trace),
        )


class DeliveryNetwork:
    """Who can deliver a program to whom, and at what network charge.

    Peers are priced with ``peer_model`` over straight-line distance. The origin
    server sits at the region center and charges ``origin_model``. Within a
    program, a viewer can be served only by viewers who joined before it, so
    every program's deliveries form a tree fed by the origin. A peer is used
    only when strictly cheaper than the origin. With ``peer_serving`` off every
    delivery comes from the origin.
    """

    def __init__(self, topology: Topology, peer_model: LinkCostModel, origin_model: LinkCostModel,
                 peer_serving: bool = True, links_only: bool = False):
        self.topology = topology
        self.peer_model = peer_model
        self.origin_model = origin_model
        self.peer_serving = peer_serving
        cost = link_cost(topology.distances, peer_model)
        np.fill_diagonal(cost, np.inf)
        if links_only:
            linked = np.zeros_like(cost, dtype=bool)
            for a, b in topology.links:
                linked[a, b] = linked[b, a] = True
            cost = np.where(linked, cost, np.inf)
        self.peer_cost = cost
        self.origin_cost = link_cost(topology.distance_to_center(), origin_model)

    def without_peers(self) -> "DeliveryNetwork":
        clone = object.__new__(DeliveryNetwork)
        clone.__dict__.update(self.__dict__)
        clone.peer_serving = False
        return clone

    def charges(self, user: int, state: MarketState) -> np.ndarray:
        """Network charge ``user`` would pay for each program given current assignments."""
        origin = self.origin_cost[user]
        n = state.members.shape[0]
        if not self.peer_serving:
            return np.full(n, origin)
        eligible = state.members
        seq = state.join_seq[user]
        if seq >= 0:
            # for its own program the user may only draw on earlier joiners
            own = int(np.argmax(state.members[:, user]))
            eligible = eligible.copy()
            eligible[own] &= (state.join_seq < seq)
        best = np.where(eligible, self.peer_cost[user], np.inf).min(axis=1)
        return np.minimum(best, origin)

    def server_of(self, user: int, program: int, state: MarketState) -> Optional[int]:
        """Serving peer of an assigned user, or None for the origin."""
        if not self.peer_serving:
            return None
        earlier = state.members[program] & (state.join_seq < state.join_seq[user])
        row = np.where(earlier, self.peer_cost[user], np.inf)
        peer = int(np.argmin(row))
        return peer if row[peer] < self.origin_cost[user] else None

    def deliveries(self, state: MarketState):
        """Delivery of every assigned user as ``(user, program, server, charge)``; server None is origin."""
        out = []
        for program, user in zip(*np.nonzero(state.members)):
            server = self.server_of(user, program, state)
            charge = self.origin_cost[user] if server is None else self.peer_cost[user, server]
            out.append((int(user), int(program), server, float(charge)))
        return out


def choose_program(agent: UserAgent, prices, network_charges) -> Optional[int]:
    """Program with the largest non-negative surplus, lowest index on ties; None to abstain."""
    surplus = agent.wtp - (np.asarray(prices) + np.asarray(network_charges))
    best = int(np.argmax(surplus))
    return best if surplus[best] >= 0 else None


def run_round(state: MarketState, agents: Sequence[UserAgent], network: DeliveryNetwork,
              policy: StepPolicy, seed, micro_scope: str = "changed") -> MarketState:
    """One revisit pass over all agents; mutates and returns ``state``.

    Agents arrive in a seeded random order. Every selection change triggers a
    micro price step on the affected programs (or on all programs when
    ``micro_scope == "all"``); a macro step follows at the end of the round.
    """
    if state.round_index >= state.total_rounds:
        raise ValueError(f"round {state.round_index} exceeds configured total {state.total_rounds}")
    prices, demand, targets = state.prices, state.observed_demand, state.target_popularity
    order = np.random.default_rng(seed).permutation(len(agents))
    for idx in order:
        agent = agents[idx]
        charges = network.charges(agent.id, state)
        new = choose_program(agent, prices, charges)
        old = agent.selection
        if new is not None:
            agent.quoted_price = float(prices[new])
        if new == old:
            continue
        if old is not None:
            state.leave(agent.id, old)
        if new is not None:
            state.join(agent.id, new)
        agent.selection = new
        touched = range(len(prices)) if micro_scope == "all" else (j for j in (old, new) if j is not None)
        for j in touched:
            prices[j] = micro_adjust(prices[j], demand[j], targets[j], policy)

    for s in {server for _, _, server, _ in network.deliveries(state) if server is not None}:
        agents[s].credit_service()
    if state.trace is not None:
        state.trace.extend((state.round_index, j, float(prices[j]), int(demand[j])) for j in range(len(prices)))
    state.prices = macro_adjust(prices, demand, targets, policy)
    state.round_index += 1
    return state
