"""True demand model: linear elasticity system, sequential demand sampler and WTP tables.

The elasticity matrix is used literally as ``demand = H @ prices`` for sampling and
price inversion. Willingness-to-pay is generated from per-program one-dimensional
curves built from the same matrix: program ``i`` at own price ``p`` (others at a
reference price) sees ``D_i + sum_{j != i} H_ij ref_j - H_ii p`` viewers, i.e. the
diagonal is read as the magnitude of the own-price slope.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

CONDITION_LIMIT = 1e12


class IllConditionedError(np.linalg.LinAlgError):
    """Elasticity matrix too close to singular to invert prices from demands."""


class NonInvertibleCurveError(ValueError):
    """A single-program demand curve has zero own-price slope."""


@dataclass(frozen=True)
class ElasticityMatrix:
    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"elasticity matrix must be square, got shape {h.shape}")
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.h.shape[0]

    def is_diagonally_dominant(self) -> bool:
        diag = np.abs(np.diag(self.h))
        off = np.abs(self.h).sum(axis=1) - diag
        return bool(np.all(diag > off))

    def to_csv(self) -> str:
        return _matrix_csv(self.h)


def generate_elasticity(n: int, rng: np.random.Generator) -> ElasticityMatrix:
    """Diagonal ~ U[1, 2], off-diagonal ~ U[0, 1/(2n)]; strictly diagonally dominant."""
    h = rng.uniform(0.0, 1.0 / (2 * n), size=(n, n))
    np.fill_diagonal(h, rng.uniform(1.0, 2.0, size=n))
    return ElasticityMatrix(h)


def generate_max_demands(n: int, m: int, low: float, high: float, rng: np.random.Generator) -> np.ndarray:
    """Survey-style maximum demands: integers drawn uniformly from [low*m, high*m]."""
    lo = int(np.floor(low * m))
    hi = max(lo, int(np.ceil(high * m)))
    return rng.integers(lo, hi + 1, size=n).astype(float)


def evaluate_demand(h: ElasticityMatrix, p, d_max=None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (h.n,):
        raise ValueError(f"price vector of length {p.shape} does not match {h.n} programs")
    d = h.h @ p
    if d_max is not None:
        d_max = np.asarray(d_max, dtype=float)
        if d_max.shape != d.shape:
            raise ValueError("max-demand profile length mismatch")
        d = np.clip(d, 0.0, d_max)
    return d


def invert_prices(h: ElasticityMatrix, d) -> np.ndarray:
    """Solve ``H p = d`` for the price vector."""
    d = np.asarray(d, dtype=float)
    if d.shape != (h.n,):
        raise ValueError(f"demand vector of length {d.shape} does not match {h.n} programs")
    cond = np.linalg.cond(h.h)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(f"elasticity matrix condition estimate {cond:.3g} exceeds {CONDITION_LIMIT:g}")
    return np.linalg.solve(h.h, d)


def sample_demands(m: int, d_max, seed) -> np.ndarray:
    """Sequential uniform draws: ``d_i ~ U[0, max(0, min(m - sum(d_<i), D_i))]``.

    Each draw is rounded half-to-even and capped at the floor of its bound, so
    the vector is integral, respects every D_i and never exceeds m in total.
    """
    d_max = np.asarray(d_max, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.zeros(len(d_max))
    remaining = float(m)
    for i, cap in enumerate(d_max):
        bound = max(0.0, min(remaining, cap))
        draw = rng.uniform(0.0, bound) if bound > 0 else 0.0
        out[i] = min(np.rint(draw), np.floor(bound))
        remaining -= out[i]
    return out


@dataclass(frozen=True)
class DemandCurve:
    """One-dimensional linear demand ``max(0, intercept - slope * p)``."""

    intercept: float
    slope: float

    @property
    def choke_price(self) -> float:
        if self.intercept <= 0:
            return 0.0
        return self.intercept / self.slope

    def __call__(self, price):
        return np.maximum(0.0, self.intercept - self.slope * np.asarray(price, dtype=float))

    def price_at(self, demand):
        """Price at which demand equals ``demand`` (never negative)."""
        return np.maximum(0.0, (self.intercept - np.asarray(demand, dtype=float)) / self.slope)

    def survival(self, price):
        """Demand normalized by demand at price zero."""
        if self.intercept <= 0:
            return np.zeros_like(np.asarray(price, dtype=float))
        return self(price) / self.intercept


def single_program_curve(d_max, h: ElasticityMatrix, i: int, reference_price: float = 0.0) -> DemandCurve:
    slope = h.h[i, i]
    if slope == 0:
        raise NonInvertibleCurveError(f"program {i} has zero self-elasticity")
    cross = h.h[i].sum() - slope
    return DemandCurve(float(d_max[i]) + cross * reference_price, float(slope))


def generate_wtp_staircase(d_max, h: ElasticityMatrix, m: int, seed=0, reference_price: float = 0.0) -> np.ndarray:
    """WTP levels at the prices where each program's demand reaches 1, 2, ..., m.

    Levels are dealt to users through a seeded permutation per program; the
    multiset of values per program does not depend on the seed.
    """
    if m < 1:
        raise ValueError("population must be >= 1")
    rng = np.random.default_rng(seed)
    steps = np.arange(1, m + 1)
    w = np.empty((m, h.n))
    for i in range(h.n):
        levels = single_program_curve(d_max, h, i, reference_price).price_at(steps)
        w[:, i] = levels[rng.permutation(m)]
    return w


def generate_wtp_random(d_max, h: ElasticityMatrix, m: int, seed, reference_price: float = 0.0) -> np.ndarray:
    """Independent WTP draws whose survival function is each program's normalized demand curve."""
    if m < 1:
        raise ValueError("population must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=(m, h.n))
    w = np.empty((m, h.n))
    for i in range(h.n):
        curve = single_program_curve(d_max, h, i, reference_price)
        # inverse survival of a linear curve: price where normalized demand = u
        w[:, i] = curve.choke_price * (1.0 - u[:, i])
    return w


def price_grid(curve: DemandCurve, points: int = 101) -> np.ndarray:
    return np.linspace(0.0, curve.choke_price, points)


def empirical_survival(wtp_column, grid) -> np.ndarray:
    """Fraction of users whose WTP is at least each grid price."""
    wtp_column = np.sort(np.asarray(wtp_column, dtype=float))
    below = np.searchsorted(wtp_column, np.asarray(grid, dtype=float), side="left")
    return (len(wtp_column) - below) / len(wtp_column)


def demand_estimation_error(estimated, truth, norm: str = "L1") -> float:
    """Grid-averaged L1 or max-abs (``Linf``) distance between two sampled curves."""
    estimated = np.asarray(estimated, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimated.shape != truth.shape:
        raise ValueError(f"curves sampled on different grids: {estimated.shape} vs {truth.shape}")
    diff = np.abs(estimated - truth)
    if norm == "L1":
        return float(diff.mean())
    if norm == "Linf":
        return float(diff.max())
    raise ValueError(f"unknown norm {norm!r}")


def wtp_to_csv(w: np.ndarray) -> str:
    return _matrix_csv(w)


def _matrix_csv(a: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(range(a.shape[1]))
    for row in a:
        writer.writerow(repr(float(v)) for v in row)
    return buf.getvalue()
