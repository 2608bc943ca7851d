"""Monte Carlo driver: paired P2PTV/unicast trials, rounds sweeps and output files."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import demand
from .config import ExperimentConfig
from .market import DeliveryNetwork, MarketState, UserAgent, run_round
from .pricing import StepPolicy, derive_targets
from .settlement import Ledger, TrialResult, compute_p2ptv_profit, compute_unicast_profit, make_result
from .topology import LinkCostModel, generate_topology

log = logging.getLogger(__name__)

TABLE1_ROUNDS = (1, 2, 3, 4, 5, 6, 7, 8, 10, 15, 20, 30, 50)
HISTOGRAM_BIN_WIDTH = 5.0

# fixed sub-stream ids under the trial seed
_TOPOLOGY, _ELASTICITY, _MAX_DEMAND, _WTP, _VISITS = range(5)


@dataclass
class Arm:
    """One side of the paired comparison: a market state, its agents and its delivery network."""

    state: MarketState
    agents: list
    network: DeliveryNetwork

    def ledger(self, cfg: ExperimentConfig, incentive_rate: float) -> Ledger:
        if self.network.peer_serving:
            return compute_p2ptv_profit(self.state, self.agents, self.network, margin=cfg.margin,
                                        server_cost=cfg.server_cost, incentive_rate=incentive_rate)
        return compute_unicast_profit(self.state, self.agents, self.network, margin=cfg.margin,
                                      server_cost=cfg.server_cost)


@dataclass
class TrialSetup:
    """Everything both arms of a trial share."""

    topology: object
    elasticity: demand.ElasticityMatrix
    d_max: np.ndarray
    wtp: np.ndarray
    targets: np.ndarray
    initial_prices: np.ndarray
    policy: StepPolicy
    incentive_rate: float


def _stream(trial_seed: int, stream: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([trial_seed, stream, *extra])


def build_trial(cfg: ExperimentConfig, trial_seed: int) -> TrialSetup:
    topo_seed = np.random.SeedSequence([trial_seed, _TOPOLOGY])
    topology = generate_topology(cfg.num_users, cfg.density, cfg.region_size, topo_seed)
    h = demand.generate_elasticity(cfg.num_programs, _stream(trial_seed, _ELASTICITY))
    d_max = demand.generate_max_demands(
        cfg.num_programs, cfg.num_users, cfg.d_max_low, cfg.d_max_high, _stream(trial_seed, _MAX_DEMAND)
    )
    wtp_seed = np.random.SeedSequence([trial_seed, _WTP])
    if cfg.wtp_mode == "staircase":
        wtp = demand.generate_wtp_staircase(d_max, h, cfg.num_users, wtp_seed, cfg.reference_price)
    else:
        wtp = demand.generate_wtp_random(d_max, h, cfg.num_users, wtp_seed, cfg.reference_price)
    targets = derive_targets(d_max, cfg.num_users)
    prices = np.maximum(demand.invert_prices(h, targets), cfg.price_floor)
    unit = float(prices.mean()) if prices.mean() > 0 else 1.0
    policy = StepPolicy(
        micro_step=cfg.micro_step * unit,
        macro_step=cfg.macro_step * unit,
        price_floor=cfg.price_floor,
        relative_gap=cfg.relative_gap,
    )
    return TrialSetup(topology, h, d_max, wtp, targets, prices, policy, cfg.incentive_rate * unit)


def _make_arm(cfg: ExperimentConfig, setup: TrialSetup, total_rounds: int, peer_serving: bool, trace=False) -> Arm:
    peer_model = LinkCostModel(cfg.link_fixed_cost, cfg.link_rate)
    network = DeliveryNetwork(
        setup.topology,
        peer_model,
        peer_model.scaled(cfg.unicast_multiplier),
        peer_serving=peer_serving,
        links_only=cfg.links_only,
    )
    state = MarketState.initial(setup.initial_prices, setup.targets, cfg.num_users, total_rounds, trace=trace)
    agents = [UserAgent(u, setup.wtp[u].copy()) for u in range(cfg.num_users)]
    return Arm(state, agents, network)


def run_trajectory(cfg: ExperimentConfig, trial_seed: int, checkpoints: Iterable[int]) -> dict[int, TrialResult]:
    """Run one paired trial up to ``max(checkpoints)`` rounds, settling after each checkpoint.

    Nothing in a round depends on how many rounds follow it, so the result at
    checkpoint ``r`` equals a standalone ``r``-round trial with the same seed.
    """
    checkpoints = sorted(set(checkpoints))
    total = checkpoints[-1]
    setup = build_trial(cfg, trial_seed)
    p2p = _make_arm(cfg, setup, total, peer_serving=cfg.peer_serving)
    uni = _make_arm(cfg, setup, total, peer_serving=False)
    results = {}
    for r in range(total):
        for arm in (p2p, uni):
            run_round(arm.state, arm.agents, arm.network, setup.policy,
                      np.random.SeedSequence([trial_seed, _VISITS, r]), cfg.micro_scope)
        if r + 1 in checkpoints:
            results[r + 1] = make_result(
                p2p.ledger(cfg, setup.incentive_rate), uni.ledger(cfg, 0.0), r + 1, trial_seed
            )
    return results


def run_trial(cfg: ExperimentConfig, trial_seed: int) -> TrialResult:
    return run_trajectory(cfg, trial_seed, [cfg.rounds])[cfg.rounds]


def trace_trial(cfg: ExperimentConfig, trial_seed: int) -> list[tuple]:
    """Per-round (arm, round, program, price, demand) rows of one paired trial, before each macro step."""
    setup = build_trial(cfg, trial_seed)
    rows = []
    for name, peers in (("p2ptv", cfg.peer_serving), ("unicast", False)):
        arm = _make_arm(cfg, setup, cfg.rounds, peer_serving=peers, trace=True)
        for r in range(cfg.rounds):
            run_round(arm.state, arm.agents, arm.network, setup.policy,
                      np.random.SeedSequence([trial_seed, _VISITS, r]), cfg.micro_scope)
        rows.extend((name, *row) for row in arm.state.trace)
    return rows


def write_trace(rows: Sequence[tuple], path):
    _write_csv(Path(path), ("arm", "round_index", "program", "price", "demand"), rows)


def write_inputs(cfg: ExperimentConfig, trial_seed: int, out_dir):
    """Dump the elasticity matrix and WTP table of one trial as CSV."""
    setup = build_trial(cfg, trial_seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "elasticity.csv").write_text(setup.elasticity.to_csv())
    (out / "wtp.csv").write_text(demand.wtp_to_csv(setup.wtp))


@dataclass(frozen=True)
class SweepRow:
    rounds: int
    mean_gain_pct: float
    stddev_gain_pct: float
    trials: int
    excluded: int

    FIELDS = ("rounds", "mean_gain_pct", "stddev_gain_pct", "trials", "excluded")


def aggregate(rounds: int, results: Sequence[TrialResult]) -> SweepRow:
    gains = np.array([r.gain_pct for r in results if not r.flagged])
    excluded = len(results) - len(gains)
    if len(gains) == 0:
        return SweepRow(rounds, math.nan, math.nan, len(results), excluded)
    std = float(np.std(gains, ddof=1)) if len(gains) > 1 else 0.0
    return SweepRow(rounds, float(gains.mean()), std, len(results), excluded)


def _trajectory_job(args):
    cfg, seed, checkpoints = args
    return run_trajectory(cfg, seed, checkpoints)


def sweep_rounds(cfg: ExperimentConfig, rounds_list: Sequence[int], trials: int | None = None):
    """Aggregate gains for each rounds value; trial ``i`` always uses seed ``base_seed + i``.

    Returns ``(rows, results)`` where ``results`` maps rounds to the per-trial list.
    """
    if not rounds_list:
        raise ValueError("rounds_list must be non-empty")
    trials = cfg.trials if trials is None else trials
    jobs = [(cfg, cfg.base_seed + i, tuple(rounds_list)) for i in range(trials)]
    if cfg.workers > 1:
        with Pool(cfg.workers) as pool:
            trajectories = pool.map(_trajectory_job, jobs, chunksize=max(1, trials // (4 * cfg.workers)))
    else:
        trajectories = [_trajectory_job(job) for job in jobs]
    results = {r: [traj[r] for traj in trajectories] for r in rounds_list}
    rows = [aggregate(r, results[r]) for r in rounds_list]
    for row in rows:
        log.info("rounds=%d mean=%.2f std=%.2f excluded=%d", row.rounds, row.mean_gain_pct,
                 row.stddev_gain_pct, row.excluded)
    return rows, results


def histogram(gains: Iterable[float], width: float = HISTOGRAM_BIN_WIDTH) -> list[tuple[float, float, int]]:
    """Contiguous ``[low, high)`` bins of ``width`` covering all finite gains."""
    gains = np.array([g for g in gains if math.isfinite(g)])
    if len(gains) == 0:
        return []
    idx = np.floor(gains / width).astype(int)
    lo, hi = idx.min(), idx.max()
    counts = np.bincount(idx - lo, minlength=hi - lo + 1)
    return [((lo + k) * width, (lo + k + 1) * width, int(c)) for k, c in enumerate(counts)]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def emit_outputs(rows: Sequence[SweepRow], results: dict, out_dir, cfg: ExperimentConfig | None = None):
    """Write sweep.csv, trials.csv, histogram.csv and summary.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", SweepRow.FIELDS, ([getattr(r, f) for f in SweepRow.FIELDS] for r in rows))
    all_results = [t for r in sorted(results) for t in results[r]]
    _write_csv(out / "trials.csv", TrialResult.FIELDS,
               ([getattr(t, f) for f in TrialResult.FIELDS] for t in all_results))
    _write_csv(out / "histogram.csv", ("bin_low", "bin_high", "count"),
               histogram(t.gain_pct for t in all_results))
    summary = {
        "config": cfg.to_dotted() if cfg is not None else None,
        "rows": [{f: _json_num(getattr(r, f)) for f in SweepRow.FIELDS} for r in rows],
        "total_trials": len(all_results),
        "excluded_trials": sum(t.flagged for t in all_results),
    }
    if rows:
        best = max((r for r in rows if math.isfinite(r.mean_gain_pct)), key=lambda r: r.mean_gain_pct, default=None)
        summary["best_rounds"] = best.rounds if best else None
    with open(out / "summary.json", "w", newline="") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _json_num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v
