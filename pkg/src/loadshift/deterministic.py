"""Optimal order schedules for known demand sequences.

:func:`load_shift` is the greedy maximal-average block algorithm. Two
independent routes reach the same optimum and are used to certify it:
:func:`concave_majorant_oracle` (slopes of the least concave majorant of the
cumulative requirement) and :func:`convex_solve_oracle` (direct numerical
solution of ``min sum G(u_k)`` under the cumulative constraints).

Block values are computed in exact rational arithmetic on the binary values of
the inputs and rounded once, so the greedy and majorant routes agree bit for
bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .cost import CostFunction, QuadraticCost

# candidates whose float average is this close to the best are settled exactly
_NEAR_TIE_RTOL = 1e-9


class Block(NamedTuple):
    """Constant run of orders over periods ``start <= k < stop``."""

    start: int
    stop: int
    value: float


@dataclass
class OrderTrajectory:
    u: np.ndarray
    blocks: list[Block] = field(default_factory=list)
    delta: float = 0.0
    x0: float = 0.0

    def __len__(self):
        return len(self.u)

    def cost(self, G: CostFunction) -> float:
        return G.total(self.u)

    def buffers(self, w) -> np.ndarray:
        """Buffer levels x_0..x_N under realised demands ``w``."""
        w = np.asarray(w, dtype=float)
        return self.x0 + np.concatenate([[0.0], np.cumsum(self.u - w)])

    def to_dict(self, G: CostFunction | None = None) -> dict:
        out = {
            "schema_version": 1,
            "u": self.u.tolist(),
            "blocks": [{"start": b.start, "stop": b.stop, "value": b.value} for b in self.blocks],
            "delta": self.delta,
            "x0": self.x0,
        }
        if G is not None:
            out["cost"] = self.cost(G)
        return out


def _check_inputs(w, delta: float, x: float) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size == 0:
        raise ValueError("demand sequence is empty")
    if not np.all(np.isfinite(w)):
        raise ValueError("demands must be finite")
    if np.any(w < 0):
        raise ValueError("demands must be non-negative")
    if delta < 0:
        raise ValueError(f"half width must be non-negative, got {delta}")
    if x < 0:
        raise ValueError(f"initial buffer must be non-negative, got {x}")
    return w


def _exact_prefix(w: np.ndarray, delta: float) -> list[Fraction]:
    """Exact cumulative requirement with the first demand raised by ``delta``."""
    prefix = [Fraction(0)]
    acc = Fraction(0)
    for i, v in enumerate(w.tolist()):
        acc += Fraction(v)
        if i == 0:
            acc += Fraction(delta)
        prefix.append(acc)
    return prefix


def load_shift(w: Sequence[float], delta: float = 0.0, x: float = 0.0) -> OrderTrajectory:
    """Greedy maximal-average block schedule.

    From period k the next block ends at the largest j maximising the average
    residual requirement over periods k..j-1. The initial buffer ``x`` offsets
    only the first block; once that block ends the buffer is used up. If the
    buffer covers the whole horizon every order is zero.
    """
    w = _check_inputs(w, delta, x)
    n = w.size
    prefix = _exact_prefix(w, delta)
    pf = np.array([float(c) for c in prefix])
    scale = abs(pf[-1]) + abs(x) + 1e-300
    buf = Fraction(x)
    u = np.empty(n)
    blocks: list[Block] = []
    k = 0
    while k < n:
        lengths = np.arange(1, n - k + 1)
        avg = (pf[k + 1:] - pf[k] - float(buf)) / lengths
        best = avg.max()
        cands = np.nonzero(avg >= best - _NEAR_TIE_RTOL * scale)[0] + 1
        top, top_len = None, 0
        for j in cands.tolist():
            val = (prefix[k + j] - prefix[k] - buf) / j
            if top is None or val >= top:
                top, top_len = val, j
        if top <= 0:
            # buffer covers everything that remains
            u[k:] = 0.0
            blocks.append(Block(k, n, 0.0))
            break
        value = float(top)
        u[k:k + top_len] = value
        blocks.append(Block(k, k + top_len, value))
        k += top_len
        buf = Fraction(0)
    return OrderTrajectory(u, blocks, float(delta), float(x))


def concave_majorant_oracle(w: Sequence[float], delta: float = 0.0,
                            x: float = 0.0) -> OrderTrajectory:
    """Slopes of the least concave majorant of the cumulative requirement.

    Points are ``(-1, 0)`` and ``(k, max(0, W_k - x))`` with ``W_k`` the
    cumulative demand through period k (first demand raised by ``delta``). The
    hull is built with exact rational cross products.
    """
    w = _check_inputs(w, delta, x)
    n = w.size
    prefix = _exact_prefix(w, delta)
    xf = Fraction(x)
    pts = [(-1, Fraction(0))] + [(k, max(Fraction(0), prefix[k + 1] - xf)) for k in range(n)]
    hull: list[tuple[int, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly above the chord
            if (y2 - y1) * (p[0] - x1) <= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    u = np.empty(n)
    blocks = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        value = float((y2 - y1) / (x2 - x1))
        u[x1 + 1:x2 + 1] = value
        blocks.append(Block(x1 + 1, x2 + 1, value))
    return OrderTrajectory(u, blocks, float(delta), float(x))


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


def _requirements(w: np.ndarray, delta: float, x: float) -> np.ndarray:
    r = np.cumsum(w)
    r = r + delta
    return r - x


def _group_blocks(u: np.ndarray, rtol: float = 1e-7) -> list[Block]:
    blocks = []
    start = 0
    scale = max(float(np.max(np.abs(u))), 1e-300)
    for k in range(1, len(u) + 1):
        if k == len(u) or abs(u[k] - u[start]) > rtol * scale:
            blocks.append(Block(start, k, float(np.mean(u[start:k]))))
            start = k
    return blocks


def _active_set_qp(req: np.ndarray, max_iter: int = 500) -> np.ndarray:
    """Primal active-set solve of ``min ||u||^2`` s.t. cumsum(u) >= req, u >= 0."""
    n = req.size
    A = np.vstack([np.tril(np.ones((n, n))), np.eye(n)])
    b = np.concatenate([req, np.zeros(n)])
    u = np.zeros(n)
    u[0] = max(float(req.max()), 0.0)
    scale = max(float(np.abs(req).max()), 1.0)
    tol = 1e-12 * scale

    work: list[int] = []
    for i in np.nonzero(np.abs(A @ u - b) <= tol)[0]:
        trial = work + [int(i)]
        if np.linalg.matrix_rank(A[trial]) == len(trial):
            work = trial

    for _ in range(max_iter):
        if work:
            Aw = A[work]
            # minimise ||u + p||^2 with Aw p = 0: project u onto null space of Aw
            lam = np.linalg.solve(Aw @ Aw.T, Aw @ u)
            target = Aw.T @ lam
        else:
            target = np.zeros(n)
            lam = np.zeros(0)
        p = target - u
        if np.linalg.norm(p) <= 1e-13 * scale:
            # gradient 2u = Aw^T mult
            mult = 2.0 * lam
            if mult.size == 0 or mult.min() >= -1e-12 * scale:
                return u
            work.pop(int(np.argmin(mult)))
            continue
        Ap = A @ p
        alpha, blocking = 1.0, None
        for i in range(A.shape[0]):
            if i in work or Ap[i] >= -1e-15:
                continue
            step = (b[i] - A[i] @ u) / Ap[i]
            if step < alpha:
                alpha, blocking = max(step, 0.0), i
        u = u + alpha * p
        if blocking is not None:
            work.append(blocking)
    raise ConvergenceError("active-set QP did not converge", {"iterations": max_iter})


def convex_solve_oracle(w: Sequence[float], delta: float, x: float, G: CostFunction,
                        rtol: float = 1e-9, max_iter: int = 1000) -> OrderTrajectory:
    """Solve ``min sum G(u_k)`` under the cumulative constraints numerically.

    Quadratic costs use an exact primal active-set method. Other costs use
    SLSQP with analytic gradients, followed by a Newton polish on the
    constraints found active, so the objective is resolved to ``rtol``.
    """
    w = _check_inputs(w, delta, x)
    n = w.size
    req = _requirements(w, float(delta), float(x))
    if req[-1] <= 0:
        return OrderTrajectory(np.zeros(n), [Block(0, n, 0.0)], float(delta), float(x))

    if isinstance(G, QuadraticCost):
        u = _active_set_qp(req)
    else:
        u = _slsqp_solve(req, G, rtol, max_iter)

    u = np.maximum(u, 0.0)
    slack = np.cumsum(u) - req
    viol = float(-slack.min()) if slack.min() < 0 else 0.0
    if viol > 1e-9 * max(1.0, abs(req[-1])):
        raise ConvergenceError("oracle returned an infeasible schedule",
                               {"max_violation": viol})
    if viol > 0:
        # lift the last order so cumulative constraints hold exactly
        u[-1] += viol
    return OrderTrajectory(u, _group_blocks(u), float(delta), float(x))


def _slsqp_solve(req: np.ndarray, G: CostFunction, rtol: float, max_iter: int) -> np.ndarray:
    n = req.size
    L = np.tril(np.ones((n, n)))
    scale = max(float(req[-1]), 1e-12)
    # work in scaled units so SLSQP tolerances are relative
    r = req / scale
    fscale = max(float(G(scale)), 1e-300)

    def f(v):
        return float(np.sum(G(np.maximum(v, 0.0) * scale))) / fscale

    def df(v):
        return np.asarray(G.derivative(np.maximum(v, 0.0) * scale)) * scale / fscale

    v0 = np.full(n, max(r.max(), 0.0) / n)
    v0 = np.maximum(v0, np.diff(np.concatenate([[0.0], np.maximum.accumulate(np.maximum(r, 0))])))
    res = minimize(
        f, v0, jac=df, method="SLSQP",
        bounds=[(0.0, None)] * n,
        constraints=[{"type": "ineq", "fun": lambda v: L @ v - r, "jac": lambda v: L}],
        options={"ftol": 1e-15, "maxiter": max_iter},
    )
    if not res.success and res.status not in (8,):
        raise ConvergenceError(f"SLSQP failed: {res.message}",
                               {"status": res.status, "nit": res.nit})
    v = _polish(np.asarray(res.x), r, L, lambda z: df(z), G, scale, fscale)
    return v * scale


def _polish(v, r, L, grad, G, scale, fscale, tol=1e-7):
    """Newton refinement on the active constraint set found by SLSQP."""
    n = v.size
    A = np.vstack([L, np.eye(n)])
    b = np.concatenate([r, np.zeros(n)])
    active = np.nonzero(np.abs(A @ v - b) <= tol)[0]
    if active.size == 0:
        return v
    Aa = A[active]
    q, rk = np.linalg.qr(Aa.T, mode="reduced")
    keep = np.abs(np.diag(rk)) > 1e-10
    Aa, ba = Aa[keep], b[active][keep]
    h = 1e-6

    def hess_diag(z):
        zz = np.maximum(z, h) * scale
        g1 = np.asarray(G.derivative(zz + h * scale))
        g0 = np.asarray(G.derivative(np.maximum(zz - h * scale, 0.0)))
        span = (zz + h * scale) - np.maximum(zz - h * scale, 0.0)
        return (g1 - g0) / span * scale * scale / fscale

    z = v.copy()
    for _ in range(30):
        g = grad(z)
        H = np.diag(np.maximum(hess_diag(z), 1e-300))
        m = Aa.shape[0]
        K = np.block([[H, -Aa.T], [Aa, np.zeros((m, m))]])
        rhs = np.concatenate([-g + 0.0, ba - Aa @ z])
        try:
            sol = np.linalg.solve(K, np.concatenate([rhs[:n], rhs[n:]]))
        except np.linalg.LinAlgError:
            return v
        # K [p; lam] = [-g; b - A z]  gives the KKT step with multipliers lam
        p = sol[:n]
        z = z + p
        if np.linalg.norm(p) <= 1e-15 * max(1.0, np.linalg.norm(z)):
            break
    slack = A @ z - b
    if slack.min() < -1e-12 or not np.all(np.isfinite(z)):
        return v
    obj = float(np.sum(G(np.maximum(z, 0.0) * scale)))
    if obj <= float(np.sum(G(np.maximum(v, 0.0) * scale))) * (1 + 1e-12):
        return z
    return v


def read_demand_csv(path) -> np.ndarray:
    """Single-column demand CSV; a non-numeric first row is taken as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no demand values")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    values = []
    for lineno, r in enumerate(rows, start=1):
        if len(r) != 1:
            raise ValueError(f"{path}: expected a single column, row {lineno} has {len(r)}")
        try:
            values.append(float(r[0]))
        except ValueError:
            raise ValueError(f"{path}: row {lineno} is not numeric: {r[0]!r}") from None
    if not values:
        raise ValueError(f"{path}: no demand values")
    return np.array(values)


def write_trajectory(traj: OrderTrajectory, w, csv_path, json_path, G: CostFunction | None = None):
    """Trajectory CSV with columns (k, w, u, x) plus a JSON sidecar with blocks and cost."""
    w = np.asarray(w, dtype=float)
    x = traj.buffers(w)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "w", "u", "x"])
        for k in range(len(w)):
            writer.writerow([k, repr(float(w[k])), repr(float(traj.u[k])), repr(float(x[k]))])
    with open(json_path, "w") as fh:
        json.dump(traj.to_dict(G), fh, indent=2, sort_keys=True)
        fh.write("\n")
