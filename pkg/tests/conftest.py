import numpy as np
import pytest

from p2ptv.market import DeliveryNetwork, MarketState, UserAgent
from p2ptv.topology import LinkCostModel, make_topology


def line_network(xs, *, fixed=1.0, rate=0.1, multiplier=2.0, region=20.0, peer_serving=True):
    """Users on the horizontal line through the region center; origin at (region/2, region/2)."""
    topo = make_topology([(x, region / 2) for x in xs], [], region)
    model = LinkCostModel(fixed, rate)
    return DeliveryNetwork(topo, model, model.scaled(multiplier), peer_serving=peer_serving)


def make_agents(wtp):
    wtp = np.atleast_2d(np.asarray(wtp, dtype=float))
    return [UserAgent(u, row.copy()) for u, row in enumerate(wtp)]


def fresh_state(prices, targets, num_users, total_rounds=10):
    return MarketState.initial(prices, targets, num_users, total_rounds)


@pytest.fixture
def line():
    return line_network
