"""User network: node placement, linear link costs and locality-based peer selection.

Dump format written by :func:`dump_topology` (LF line endings)::

    # p2ptv topology v1
    region <size>
    node <id> <x> <y>       one line per node, ids ascending
    link <id_a> <id_b>      one line per undirected link, id_a < id_b

Coordinates are written with ``repr`` so a dump round-trips bit-exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class LinkCostModel:
    fixed_cost: float = 1.0
    per_distance_rate: float = 0.02

    def __post_init__(self):
        if self.fixed_cost < 0 or self.per_distance_rate < 0:
            raise ValueError("link cost parameters must be non-negative")

    def scaled(self, factor: float) -> "LinkCostModel":
        """Same tariff shape with both components multiplied by ``factor``."""
        return LinkCostModel(self.fixed_cost * factor, self.per_distance_rate * factor)


@dataclass(frozen=True)
class Topology:
    positions: np.ndarray  # (N, 2)
    links: frozenset  # of (a, b) with a < b
    region_size: float
    distances: np.ndarray = field(repr=False, compare=False)

    @property
    def num_nodes(self) -> int:
        return len(self.positions)

    @property
    def density(self) -> float:
        return len(self.links) / self.num_nodes

    @property
    def center(self) -> np.ndarray:
        return np.array([self.region_size / 2.0, self.region_size / 2.0])

    def distance(self, a: int, b: int) -> float:
        return float(self.distances[a, b])

    def distance_to_center(self) -> np.ndarray:
        return np.hypot(*(self.positions - self.center).T)

    def neighbors(self, node: int) -> set[int]:
        return {b if a == node else a for a, b in self.links if node in (a, b)}

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            self.region_size == other.region_size
            and self.links == other.links
            and np.array_equal(self.positions, other.positions)
        )


def _pairwise_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    # hypot is symmetric elementwise, but pin the diagonal explicitly
    np.fill_diagonal(d, 0.0)
    return d


def make_topology(positions, links: Iterable[tuple[int, int]], region_size: float) -> Topology:
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    normalized = set()
    for a, b in links:
        if a == b:
            raise ValueError(f"self-loop on node {a}")
        normalized.add((min(a, b), max(a, b)))
    return Topology(positions, frozenset(normalized), float(region_size), _pairwise_distances(positions))


def generate_topology(num_users: int, density: float, region_size: float, seed: int) -> Topology:
    """Place users uniformly on a square and draw ``round(density * num_users)`` distinct links."""
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    if density < 0:
        raise ValueError("density must be >= 0")
    num_links = int(round(density * num_users))
    max_links = num_users * (num_users - 1) // 2
    if num_links > max_links:
        raise ValueError(
            f"density {density} needs {num_links} links but {num_users} users allow at most {max_links}"
        )
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, region_size, size=(num_users, 2))
    pairs = list(itertools.combinations(range(num_users), 2))
    chosen = rng.choice(len(pairs), size=num_links, replace=False) if num_links else []
    return make_topology(positions, (pairs[k] for k in chosen), region_size)


def link_cost(distance, model: LinkCostModel, data_volume=1.0):
    """Linear tariff: ``data_volume * (fixed_cost + per_distance_rate * distance)``.

    Works elementwise on arrays.
    """
    return data_volume * (model.fixed_cost + model.per_distance_rate * distance)


def select_serving_peer(
    requester: int, candidates: Iterable[int], topology: Topology, model: LinkCostModel
) -> Optional[int]:
    """Cheapest candidate by link cost, lowest id on ties; None means unicast from the origin."""
    best = None
    best_cost = np.inf
    for peer in sorted(candidates):
        if peer == requester:
            raise ValueError("requester cannot serve itself")
        cost = link_cost(topology.distances[requester, peer], model)
        if cost < best_cost:
            best, best_cost = peer, cost
    return best


def dump_topology(topology: Topology) -> str:
    lines = ["# p2ptv topology v1", f"region {topology.region_size!r}"]
    for i, (x, y) in enumerate(topology.positions):
        lines.append(f"node {i} {float(x)!r} {float(y)!r}")
    for a, b in sorted(topology.links):
        lines.append(f"link {a} {b}")
    return "\n".join(lines) + "\n"


def load_topology(text: str) -> Topology:
    positions, links, region = [], [], None
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        kind, *rest = line.split()
        if kind == "region":
            region = float(rest[0])
        elif kind == "node":
            idx = int(rest[0])
            if idx != len(positions):
                raise ValueError(f"node ids must be dense and ascending, got {idx}")
            positions.append((float(rest[1]), float(rest[2])))
        elif kind == "link":
            links.append((int(rest[0]), int(rest[1])))
        else:
            raise ValueError(f"unknown record {kind!r}")
    if region is None:
        raise ValueError("missing region line")
    return make_topology(positions, links, region)
