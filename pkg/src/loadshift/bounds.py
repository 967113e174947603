"""Closed-form expected costs and performance bounds for the myopic and LSH policies.

The spread statistic ``S_u`` is reported under two readings:

* ``literal``: spread of ``load_shift(mu, delta, 0)``;
* ``heuristic``: spread of the LSH nominal orders
  ``(mu_0 + delta, load_shift(mu_1.., 0, 0))``.

They coincide when ``delta == 0`` and the first mean is the largest block. The
deterministic pair ``mu = [1, 3]`` shows why both are kept: the literal upper
bound on the LSH gap is 0 while the measured gap is 200 (for G = 100 u^2).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .cost import CostFunction
from .demand import InventoryProblem, validate
from .deterministic import load_shift
from .policies import lsh_build


@dataclass(frozen=True)
class NominalStats:
    M: float
    S_mu: float
    S_u_literal: float
    S_u_heuristic: float


def nominal_stats(means, delta: float) -> NominalStats:
    mu = np.asarray(means, dtype=float).reshape(-1)
    if mu.size == 0:
        raise ValueError("means must be non-empty")
    n = mu.size
    M = (delta + float(np.sum(mu))) / n
    shifted = mu.copy()
    shifted[0] += delta
    S_mu = float(np.sum((shifted - M) ** 2))
    u_lit = load_shift(mu, delta, 0.0).u
    u_heu = lsh_build(mu, delta).nominal_orders
    return NominalStats(M, S_mu, float(np.sum((u_lit - M) ** 2)),
                        float(np.sum((u_heu - M) ** 2)))


def variance_sum(problem: InventoryProblem) -> float:
    """Sum of demand variances over all periods but the last."""
    return float(np.sum(problem.demand.variances[:-1]))


def curvature_interval(problem: InventoryProblem) -> tuple[float, float]:
    """Range of orders the bounds' Taylor expansions can touch.

    Every myopic, LSH and load-shift order lies in ``[0, max_k mu_k + delta]``;
    for tabulated costs the interval is clipped to the cost's domain.
    """
    upper = float(np.max(problem.means)) + problem.delta
    lo, hi = problem.cost.domain
    return max(0.0, lo), min(upper, hi)


def _expected_sum(G: CostFunction, centers: np.ndarray, offsets: np.ndarray) -> float:
    """sum_k E[G(centers[k] + W)] with W uniform over ``offsets``."""
    vals = G(centers[:, None] + offsets[None, :])
    return float(np.sum(np.mean(vals, axis=1)))


def myopic_expected_cost(problem: InventoryProblem) -> float:
    validate(problem).raise_if_invalid()
    G, mu, delta = problem.cost, problem.means, problem.delta
    offsets = problem.demand.offsets()
    # period k >= 1 orders mu_k + w_{k-1} - mu_{k-1} = mu_k + offset
    return float(G(mu[0] + delta)) + _expected_sum(G, mu[1:], offsets)


def heuristic_expected_cost(problem: InventoryProblem) -> float:
    validate(problem).raise_if_invalid()
    G, mu, delta = problem.cost, problem.means, problem.delta
    orders = lsh_build(mu, delta).nominal_orders
    offsets = problem.demand.offsets()
    return float(G(mu[0] + delta)) + _expected_sum(G, orders[1:], offsets)


@dataclass(frozen=True)
class BoundReport:
    M: float
    S_mu: float
    S_u_literal: float
    S_u_heuristic: float
    variance_sum: float
    l: float
    L: float
    curvature_interval: tuple[float, float]
    curvature_method: str
    lb_myopic_gap_literal: float
    lb_myopic_gap_heuristic: float
    ub_heuristic_gap_literal: float
    ub_heuristic_gap_heuristic: float
    myopic_expected_cost: float
    heuristic_expected_cost: float

    @property
    def lb_myopic_gap(self) -> float:
        return self.lb_myopic_gap_literal

    def to_dict(self) -> dict:
        out = asdict(self)
        out["curvature_interval"] = list(self.curvature_interval)
        out["schema_version"] = 1
        out["readings"] = {
            "lb_myopic_gap": "literal (S_u from load_shift(mu, delta, 0))",
            "ub_heuristic_gap": ("heuristic (S_u from the LSH nominal orders); "
                                 "literal kept for reference"),
        }
        return out


def _gaps(stats: NominalStats, var_sum: float, l: float, L: float):
    lb_lit = 0.5 * l * (stats.S_mu + var_sum) - 0.5 * L * (stats.S_u_literal + var_sum)
    lb_heu = 0.5 * l * (stats.S_mu + var_sum) - 0.5 * L * (stats.S_u_heuristic + var_sum)
    ub_lit = 0.5 * L * (stats.S_u_literal + var_sum)
    ub_heu = 0.5 * L * (stats.S_u_heuristic + var_sum)
    return lb_lit, lb_heu, ub_lit, ub_heu


def myopic_gap_lower_bound(problem: InventoryProblem) -> dict[str, float]:
    r = bound_report(problem)
    return {"literal": r.lb_myopic_gap_literal, "heuristic": r.lb_myopic_gap_heuristic}


def heuristic_gap_upper_bound(problem: InventoryProblem) -> dict[str, float]:
    r = bound_report(problem)
    return {"literal": r.ub_heuristic_gap_literal, "heuristic": r.ub_heuristic_gap_heuristic}


def bound_report(problem: InventoryProblem) -> BoundReport:
    validate(problem).raise_if_invalid()
    stats = nominal_stats(problem.means, problem.delta)
    var_sum = variance_sum(problem)
    lo, hi = curvature_interval(problem)
    curv = problem.cost.curvature_bounds(lo, hi)
    gaps = _gaps(stats, var_sum, curv.lower, curv.upper)
    return BoundReport(
        stats.M, stats.S_mu, stats.S_u_literal, stats.S_u_heuristic, var_sum,
        curv.lower, curv.upper, (lo, hi), curv.method, *gaps,
        myopic_expected_cost(problem), heuristic_expected_cost(problem),
    )
