"""Ordering policies for stochastic demand.

Every policy exposes ``decide(k, x)`` returning the order for period ``k`` at
buffer level ``x``; ``x`` may be a scalar or an array of buffer levels (one per
simulated path).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .demand import InventoryProblem, grid_index, validate
from .deterministic import load_shift


def _as_out(values, like):
    return float(values) if np.ndim(like) == 0 else values


def _check_period(k: int, n: int) -> None:
    if not 0 <= k < n:
        raise IndexError(f"period {k} outside horizon 0..{n - 1}")


def myopic_decide(k: int, x, problem: InventoryProblem):
    """Order just enough to survive the worst-case demand of period k."""
    _check_period(k, problem.horizon)
    need = problem.means[k] + problem.delta
    return _as_out(np.maximum(0.0, need - np.asarray(x, dtype=float)), x)


@dataclass(frozen=True, eq=False)
class TargetTrajectory:
    """Target buffer levels (before demand) tracked by the load-shifting heuristic."""

    targets: np.ndarray
    nominal_orders: np.ndarray


def lsh_build(means, delta: float) -> TargetTrajectory:
    means = np.asarray(means, dtype=float).reshape(-1)
    n = means.size
    if n < 1:
        raise ValueError("horizon must contain at least one period")
    orders = np.empty(n)
    orders[0] = means[0] + delta
    if n > 1:
        orders[1:] = load_shift(means[1:], 0.0, 0.0).u
    targets = np.empty(n)
    targets[0] = orders[0]
    for k in range(1, n):
        targets[k] = targets[k - 1] + orders[k] - means[k - 1]
    return TargetTrajectory(targets, orders)


def lsh_decide(k: int, x, target: TargetTrajectory):
    _check_period(k, len(target.targets))
    return _as_out(np.maximum(0.0, target.targets[k] - np.asarray(x, dtype=float)), x)


def rhh_decide(k: int, x: float, mu_tail, delta: float) -> float:
    """First order of the load-shift plan over the remaining means."""
    mu_tail = np.asarray(mu_tail, dtype=float)
    if mu_tail.size == 0:
        raise ValueError("no remaining periods")
    x = max(float(x), 0.0)
    return float(load_shift(mu_tail, delta, x).u[0])


@dataclass(eq=False)
class ValueFunction:
    """Backward-induction tables on the state grid ``0, dx, ..., x_max``.

    ``cost_to_go[k, i]`` is J_k at state ``i * dx`` (row N is the zero terminal
    cost); ``order_steps[k, i]`` is the minimising order in grid steps.
    """

    dx: float
    cost_to_go: np.ndarray
    order_steps: np.ndarray

    @property
    def horizon(self) -> int:
        return self.order_steps.shape[0]

    @property
    def n_states(self) -> int:
        return self.cost_to_go.shape[1]

    @property
    def x_max(self) -> float:
        return (self.n_states - 1) * self.dx

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_states) * self.dx

    @property
    def orders(self) -> np.ndarray:
        return self.order_steps * self.dx

    def state_index(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-9
        q = x / self.dx
        slack = tol * max(1.0, self.n_states)
        if np.any(q < -slack) or np.any(q > self.n_states - 1 + slack):
            raise ValueError(f"state outside value-function grid [0, {self.x_max}]: {x}")
        # round down; the small slack absorbs accumulated floating error
        return np.clip(np.floor(q + 1e-7), 0, self.n_states - 1).astype(int)

    def decide(self, k: int, x):
        _check_period(k, self.horizon)
        u = self.orders[k, self.state_index(x)]
        return _as_out(u, x)

    def value(self, k: int, x):
        return _as_out(self.cost_to_go[k, self.state_index(x)], x)

    def to_csv(self, directory) -> list[Path]:
        """One CSV per period with columns (x, J, u)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        grid = self.grid
        width = len(str(self.horizon))
        paths = []
        for k in range(self.horizon + 1):
            p = directory / f"period_{k:0{width}d}.csv"
            with open(p, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["x", "J", "u"])
                for i in range(self.n_states):
                    u = repr(float(self.orders[k, i])) if k < self.horizon else ""
                    writer.writerow([repr(float(grid[i])), repr(float(self.cost_to_go[k, i])), u])
            paths.append(p)
        return paths


class GridError(ValueError):
    """Problem data not representable on the dynamic-programming grid."""


def _to_steps(value: float, dx: float, what: str) -> int:
    n = grid_index(value, dx)
    if n is None:
        raise GridError(f"{what} = {value} is not a multiple of dx = {dx}")
    return n


def dp_solve(problem: InventoryProblem, x_max: float | None = None, dx: float | None = None,
             threads: int | None = None, chunk: int = 512) -> ValueFunction:
    """Backward induction with exact expectation over the discrete demand support.

    Orders are multiples of ``dx`` and the post-order level is capped so that
    every successor state stays inside ``[0, x_max]``; no interpolation occurs.
    ``x_max`` defaults to ``problem.x_max`` or, failing that, the sum of
    worst-case demands rounded up to the grid.
    """
    validate(problem).raise_if_invalid()
    spec = problem.demand
    dx = float(dx or spec.grid_step)
    G = problem.cost
    step = _to_steps(spec.grid_step, dx, "demand grid step")
    low = np.array([_to_steps(v - spec.half_width, dx, f"lowest demand of period {k}")
                    for k, v in enumerate(spec.means)])
    span = (spec.support_size - 1) * step
    if x_max is None:
        x_max = problem.x_max
    if x_max is None:
        n_max = int(math.ceil(float(np.sum(spec.means + spec.half_width)) / dx - 1e-9))
    else:
        n_max = _to_steps(float(x_max), dx, "x_max")
    _to_steps(problem.x0, dx, "initial buffer")
    if problem.x0 > n_max * dx * (1 + 1e-12):
        raise GridError(f"initial buffer {problem.x0} exceeds x_max {n_max * dx}")

    n_states = n_max + 1
    N = spec.horizon
    demand_steps = np.arange(spec.support_size) * step
    max_order = n_max + int(low.max())
    lo, hi = G.domain
    order_grid = np.arange(max_order + 1) * dx
    order_cost = np.full(max_order + 1, np.inf)
    ok = (order_grid >= lo - 1e-12 * max(1.0, lo)) & (order_grid <= hi * (1 + 1e-12))
    order_cost[ok] = G(order_grid[ok])

    J = np.zeros((N + 1, n_states))
    pol = np.zeros((N, n_states), dtype=np.int64)
    states = np.arange(n_states)
    pool = ThreadPoolExecutor(max_workers=threads) if threads and threads > 1 else None
    try:
        for k in range(N - 1, -1, -1):
            y_lo = int(low[k] + span)             # cover the worst-case demand
            y_hi = int(n_max + low[k])            # lowest demand must not overflow x_max
            if y_hi < y_lo:
                raise GridError(f"x_max too small for period {k}: needs at least {span * dx}")
            ys = np.arange(y_lo, y_hi + 1)
            nxt = J[k + 1]
            expected = np.zeros(ys.size)
            for off in demand_steps:
                expected += nxt[ys - (low[k] + off)]
            expected /= demand_steps.size

            def solve_rows(rows, k=k, ys=ys, expected=expected, y_lo=y_lo):
                diff = ys[None, :] - rows[:, None]
                stage = order_cost[np.clip(diff, 0, None)] + expected[None, :]
                total = np.where(diff >= 0, stage, np.inf)
                best = np.argmin(total, axis=1)  # first minimiser = smallest order
                J[k, rows] = total[np.arange(rows.size), best]
                pol[k, rows] = ys[best] - rows

            row_chunks = [states[i:i + chunk] for i in range(0, n_states, chunk)]
            if pool is None:
                for rows in row_chunks:
                    solve_rows(rows)
            else:
                list(pool.map(solve_rows, row_chunks))
    finally:
        if pool is not None:
            pool.shutdown()
    return ValueFunction(dx, J, pol)


def dp_decide(value: ValueFunction, k: int, x):
    return value.decide(k, x)


class Policy:
    name = "policy"

    def __init__(self, problem: InventoryProblem):
        self.problem = problem

    def decide(self, k: int, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class MyopicPolicy(Policy):
    name = "myopic"

    def decide(self, k, x):
        return myopic_decide(k, x, self.problem)


class LSHPolicy(Policy):
    name = "lsh"

    def __init__(self, problem):
        super().__init__(problem)
        self.target = lsh_build(problem.means, problem.delta)

    def decide(self, k, x):
        return lsh_decide(k, x, self.target)


class RHHPolicy(Policy):
    name = "rhh"

    def decide(self, k, x):
        _check_period(k, self.problem.horizon)
        tail = self.problem.means[k:]
        if np.ndim(x) == 0:
            return rhh_decide(k, x, tail, self.problem.delta)
        x = np.asarray(x, dtype=float)
        return np.array([rhh_decide(k, xi, tail, self.problem.delta) for xi in x])


class DPPolicy(Policy):
    name = "dp"

    def __init__(self, problem, value: ValueFunction | None = None, **solve_kw):
        super().__init__(problem)
        self.value = value if value is not None else dp_solve(problem, **solve_kw)

    def decide(self, k, x):
        return self.value.decide(k, x)


POLICIES = {"myopic": MyopicPolicy, "lsh": LSHPolicy, "rhh": RHHPolicy, "dp": DPPolicy}


def make_policy(name: str, problem: InventoryProblem, **kw) -> Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(problem, **kw) if cls is DPPolicy else cls(problem)
