"""Monte Carlo rollouts and policy comparison under common random numbers."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bounds import bound_report
from .demand import DemandPath, InventoryProblem, path_seeds, sample_paths, validate
from .policies import DPPolicy, Policy, make_policy

Z95 = 1.959963984540054


class FeasibilityError(RuntimeError):
    """A policy let the buffer go negative."""


@dataclass
class RolloutResult:
    policy: str
    seed: int
    orders: np.ndarray
    buffers: np.ndarray
    cost: float


def _feasibility_tol(problem: InventoryProblem) -> float:
    return 1e-9 * max(1.0, float(np.max(problem.means)) + problem.delta)


def rollout(policy: Policy, path: DemandPath, problem: InventoryProblem) -> RolloutResult:
    w = np.asarray(path.values, dtype=float)
    n = problem.horizon
    if w.size != n:
        raise ValueError(f"path has {w.size} periods, problem has {n}")
    tol = _feasibility_tol(problem)
    x = np.empty(n + 1)
    u = np.empty(n)
    x[0] = problem.x0
    for k in range(n):
        u[k] = policy.decide(k, x[k])
        if u[k] < 0:
            raise FeasibilityError(f"{policy.name}: negative order {u[k]} at period {k}")
        x[k + 1] = x[k] + u[k] - w[k]
        if x[k + 1] < -tol:
            raise FeasibilityError(
                f"{policy.name}: buffer {x[k + 1]:.6g} < 0 after period {k} (seed {path.seed})")
        x[k + 1] = max(x[k + 1], 0.0)
    return RolloutResult(policy.name, path.seed, u, x, problem.cost.total(u))


def rollout_batch(policy: Policy, demands: np.ndarray, problem: InventoryProblem):
    """Vectorised rollout over many paths: returns (orders, buffers, costs)."""
    W = np.atleast_2d(np.asarray(demands, dtype=float))
    runs, n = W.shape
    tol = _feasibility_tol(problem)
    X = np.empty((runs, n + 1))
    U = np.empty((runs, n))
    X[:, 0] = problem.x0
    for k in range(n):
        U[:, k] = policy.decide(k, X[:, k])
        nxt = X[:, k] + U[:, k] - W[:, k]
        if nxt.min() < -tol:
            r = int(np.argmin(nxt))
            raise FeasibilityError(
                f"{policy.name}: buffer {nxt[r]:.6g} < 0 after period {k} (run {r})")
        X[:, k + 1] = np.maximum(nxt, 0.0)
    costs = np.sum(problem.cost(U), axis=1)
    return U, X, costs


@dataclass
class PolicyStats:
    mean: float
    stderr: float
    runs: int


@dataclass
class PairedGap:
    first: str
    second: str
    mean: float
    stderr: float
    ci_low: float
    ci_high: float


@dataclass
class ComparisonReport:
    problem: dict
    master_seed: int
    n_runs: int
    stats: dict[str, PolicyStats]
    gaps: list[PairedGap]
    percent_reduction_vs_myopic: dict[str, float]
    bounds: dict | None
    bound_table: list[dict]
    costs: dict[str, np.ndarray] = field(repr=False)
    seeds: np.ndarray = field(repr=False)
    mean_orders: dict[str, np.ndarray] = field(repr=False)
    mean_buffers: dict[str, np.ndarray] = field(repr=False)

    def gap(self, first: str, second: str) -> PairedGap:
        for g in self.gaps:
            if (g.first, g.second) == (first, second):
                return g
            if (g.second, g.first) == (first, second):
                return PairedGap(first, second, -g.mean, g.stderr, -g.ci_high, -g.ci_low)
        raise KeyError((first, second))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "problem": self.problem,
            "master_seed": self.master_seed,
            "n_runs": self.n_runs,
            "policies": {k: vars(v) for k, v in self.stats.items()},
            "paired_gaps": [vars(g) for g in self.gaps],
            "percent_reduction_vs_myopic": self.percent_reduction_vs_myopic,
            "bounds": self.bounds,
            "bound_vs_measured": self.bound_table,
        }

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        names = list(self.stats)
        report = directory / "report.json"
        report.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        costs = directory / "costs.csv"
        with open(costs, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run", "seed", *names])
            for i in range(self.n_runs):
                writer.writerow([i, int(self.seeds[i]),
                                 *(repr(float(self.costs[p][i])) for p in names)])
        traj = directory / "trajectories.csv"
        n = len(next(iter(self.mean_orders.values())))
        with open(traj, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", *(f"{p}_u" for p in names), *(f"{p}_x" for p in names)])
            for k in range(n):
                writer.writerow([k, *(repr(float(self.mean_orders[p][k])) for p in names),
                                 *(repr(float(self.mean_buffers[p][k])) for p in names)])
        return [report, costs, traj]

    def summary(self) -> str:
        lines = [f"{'policy':<8} {'mean cost':>14} {'std err':>12} {'vs myopic':>10}"]
        for name, s in self.stats.items():
            red = self.percent_reduction_vs_myopic.get(name)
            red_s = f"{red:9.2f}%" if red is not None else f"{'-':>10}"
            lines.append(f"{name:<8} {s.mean:14.6g} {s.stderr:12.4g} {red_s}")
        for row in self.bound_table:
            lines.append(
                f"{row['gap']}: measured {row['measured']:.6g} (se {row['stderr']:.3g}), "
                f"{row['kind']} bound {row['bound']:.6g} [{row['reading']} reading]")
        return "\n".join(lines)


def _stats(c: np.ndarray) -> PolicyStats:
    se = float(np.std(c, ddof=1) / np.sqrt(c.size)) if c.size > 1 else 0.0
    return PolicyStats(float(np.mean(c)), se, int(c.size))


def _paired(a: str, b: str, ca: np.ndarray, cb: np.ndarray) -> PairedGap:
    s = _stats(ca - cb)
    return PairedGap(a, b, s.mean, s.stderr, s.mean - Z95 * s.stderr, s.mean + Z95 * s.stderr)


def monte_carlo(problem: InventoryProblem, policies: Sequence[str | Policy], n_runs: int,
                master_seed: int, threads: int | None = None, dp_kwargs: dict | None = None,
                with_bounds: bool = True) -> ComparisonReport:
    """Evaluate policies on a shared set of seeded demand paths."""
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    validate(problem).raise_if_invalid()
    built: list[Policy] = []
    for p in policies:
        if isinstance(p, Policy):
            built.append(p)
        elif p == "dp":
            built.append(DPPolicy(problem, **(dp_kwargs or {})))
        else:
            built.append(make_policy(p, problem))
    names = [p.name for p in built]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate policy names: {names}")

    seeds = path_seeds(master_seed, n_runs)
    W = sample_paths(problem.demand, seeds)

    def run(p):
        return rollout_batch(p, W, problem)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, built))
    else:
        results = [run(p) for p in built]

    costs = {name: r[2] for name, r in zip(names, results)}
    stats = {name: _stats(c) for name, c in costs.items()}
    gaps = [_paired(a, b, costs[a], costs[b])
            for i, a in enumerate(names) for b in names[i + 1:]]
    reductions = {}
    if "myopic" in costs:
        base = stats["myopic"].mean
        reductions = {n: 100.0 * (base - s.mean) / base for n, s in stats.items()}

    bounds = None
    table: list[dict] = []
    if with_bounds:
        try:
            rep = bound_report(problem)
        except ValueError:
            rep = None
        if rep is not None:
            bounds = rep.to_dict()
            if "dp" in costs and "myopic" in costs:
                g = _paired("myopic", "dp", costs["myopic"], costs["dp"])
                table.append({"gap": "myopic - dp", "kind": "lower", "reading": "literal",
                              "bound": rep.lb_myopic_gap_literal, "measured": g.mean,
                              "stderr": g.stderr})
            if "dp" in costs and "lsh" in costs:
                g = _paired("lsh", "dp", costs["lsh"], costs["dp"])
                table.append({"gap": "lsh - dp", "kind": "upper", "reading": "heuristic",
                              "bound": rep.ub_heuristic_gap_heuristic, "measured": g.mean,
                              "stderr": g.stderr})
                table.append({"gap": "lsh - dp", "kind": "upper", "reading": "literal",
                              "bound": rep.ub_heuristic_gap_literal, "measured": g.mean,
                              "stderr": g.stderr})

    return ComparisonReport(
        problem=problem.to_dict(), master_seed=int(master_seed), n_runs=int(n_runs),
        stats=stats, gaps=gaps, percent_reduction_vs_myopic=reductions, bounds=bounds,
        bound_table=table, costs=costs, seeds=seeds,
        mean_orders={n: r[0].mean(axis=0) for n, r in zip(names, results)},
        mean_buffers={n: r[1].mean(axis=0) for n, r in zip(names, results)},
    )
