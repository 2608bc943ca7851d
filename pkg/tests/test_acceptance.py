"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``. The calibrated criteria (7-9)
use the shipped defaults at full scale and take a few minutes.
"""

import math
import time

import numpy as np
import pytest

from p2ptv import demand
from p2ptv.config import ExperimentConfig
from p2ptv.harness import TABLE1_ROUNDS, emit_outputs, sweep_rounds
from p2ptv.market import UserAgent, choose_program

DEFAULT = ExperimentConfig()
OUTPUT_FILES = ("sweep.csv", "trials.csv", "histogram.csv", "summary.json")


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return _report


@pytest.fixture(scope="module")
def default_sweep(tmp_path_factory):
    start = time.perf_counter()
    rows, results = sweep_rounds(DEFAULT, TABLE1_ROUNDS)
    elapsed = time.perf_counter() - start
    out = emit_outputs(rows, results, tmp_path_factory.mktemp("sweep_a"), DEFAULT)
    return {r.rounds: r for r in rows}, elapsed, out


def test_1_demand_sampler_bounds(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    violations = 0
    cases = 10_000
    for seed in range(cases):
        n = int(rng.integers(1, 31))
        m = int(rng.integers(0, 201))
        d_max = rng.uniform(0, 1.5 * max(m, 1), size=n)
        if rng.random() < 0.1:
            d_max[rng.random(n) < 0.5] = 0.0
        d = demand.sample_demands(m, d_max, seed)
        violations += not (np.all(d >= 0) and np.all(d <= d_max) and d.sum() <= m)
    elapsed = time.perf_counter() - start
    report(1, violations == 0 and elapsed < 10,
           f"{cases} cases, {violations} violations, {elapsed:.2f}s (limit 10s)")


def test_2_inversion_round_trip(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        h = demand.generate_elasticity(n, rng)
        d = rng.uniform(0, 60, size=n)
        if not np.any(d):
            continue
        p = demand.invert_prices(h, d)
        worst = max(worst, float(np.linalg.norm(h.h @ p - d) / np.linalg.norm(d)))
    report(2, worst < 1e-9, f"worst relative residual {worst:.2e} over 1000 matrices (limit 1e-9)")


def test_3_choice_invariance(report):
    rng = np.random.default_rng(11)
    changed = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 16))
        wtp = rng.uniform(0, 100, n)
        total = rng.uniform(0, 100, n)
        charges = rng.uniform(0, 10, n)
        shift = float(rng.choice([-1, 1]) * 2.0 ** rng.integers(-4, 8))
        base = choose_program(UserAgent(0, wtp), total, charges)
        moved = choose_program(UserAgent(0, wtp + shift), total + shift, charges)
        changed += base != moved
    report(3, changed == 0, f"10000 agents, {changed} changed choices (dyadic shifts keep sums exact)")


def test_4_determinism(report, default_sweep, tmp_path):
    _, _, first = default_sweep
    rows, results = sweep_rounds(DEFAULT, TABLE1_ROUNDS)
    second = emit_outputs(rows, results, tmp_path, DEFAULT)
    differing = [f for f in OUTPUT_FILES if (first / f).read_bytes() != (second / f).read_bytes()]
    report(4, not differing, f"two full default sweeps, differing files: {differing or 'none'}")


def test_5_self_comparison_zero(report):
    cfg = DEFAULT.replace(peer_serving=False, trials=200)
    _, results = sweep_rounds(cfg, [1, 5, 20])
    trials = [t for cell in results.values() for t in cell]
    nonzero = [t for t in trials if not t.flagged and t.gain_pct != 0.0]
    flagged = sum(t.flagged for t in trials)
    report(5, not nonzero, f"{len(trials)} trials, {len(nonzero)} nonzero gains, {flagged} flagged")


def test_6_wtp_convergence_trend(report):
    h = demand.ElasticityMatrix([[1.4]])
    d_max = [40.0]
    curve = demand.single_program_curve(d_max, h, 0)
    grid = demand.price_grid(curve)
    truth = curve.survival(grid)
    errors = []
    for m in (10, 30, 50, 100):
        errs = [
            demand.demand_estimation_error(
                demand.empirical_survival(demand.generate_wtp_random(d_max, h, m, seed)[:, 0], grid), truth, "L1")
            for seed in range(200)
        ]
        errors.append(float(np.mean(errs)))
    ok = all(a > b for a, b in zip(errors, errors[1:]))
    report(6, ok, "mean L1 error at m=10,30,50,100: " + ", ".join(f"{e:.4f}" for e in errors))


def test_7_table1_shape(report, default_sweep):
    rows, elapsed, _ = default_sweep
    m5, s5 = rows[5].mean_gain_pct, rows[5].stddev_gain_pct
    checks = {
        "mean5 in [24.7, 34.7]": 24.7 <= m5 <= 34.7,
        "mean5 > mean1": m5 > rows[1].mean_gain_pct,
        "mean5 > mean50": m5 > rows[50].mean_gain_pct,
        "std5 minimal over 1..8": all(s5 <= rows[r].stddev_gain_pct for r in range(1, 9)),
        "runtime <= 300s": elapsed <= 300,
    }
    failed = [name for name, ok in checks.items() if not ok]
    detail = (f"trials={DEFAULT.trials} mean1={rows[1].mean_gain_pct:.1f} mean5={m5:.1f} "
              f"mean50={rows[50].mean_gain_pct:.1f} std1..8="
              + "/".join(f"{rows[r].stddev_gain_pct:.1f}" for r in range(1, 9))
              + f" runtime={elapsed:.0f}s failed={failed or 'none'}")
    report(7, not failed, detail)


def test_8_overall_magnitude(report, default_sweep):
    rows, _, _ = default_sweep
    best = max(rows.values(), key=lambda r: r.mean_gain_pct)
    report(8, 25 <= best.mean_gain_pct <= 35,
           f"max mean gain {best.mean_gain_pct:.1f} at rounds={best.rounds} (band [25, 35])")


def test_9_ablation(report):
    cfg = DEFAULT.replace(incentive_rate=0.0, unicast_multiplier=1.0)
    rows, _ = sweep_rounds(cfg, TABLE1_ROUNDS)
    worst = max(rows, key=lambda r: abs(r.mean_gain_pct) if math.isfinite(r.mean_gain_pct) else math.inf)
    ok = all(math.isfinite(r.mean_gain_pct) and abs(r.mean_gain_pct) < 5 for r in rows)
    report(9, ok, f"largest |mean gain| {abs(worst.mean_gain_pct):.1f} at rounds={worst.rounds} "
                  f"over all {len(rows)} rounds values (limit 5)")
