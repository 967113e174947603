"""Problem instances: demand distributions, validation and seeded sample paths.

Demand in period k is discrete-uniform on the grid points
``mu_k - delta + i * grid_step`` for ``i = 0, ..., n - 1`` with
``n = 2 * delta / grid_step + 1`` (so the law is symmetric about ``mu_k``).
Periods are independent.

Seeding rule: a path with integer seed ``s`` is drawn from
``numpy.random.default_rng(s)`` with one vectorised ``integers`` call, so the
grid offset of period k is the k-th draw of that stream. A path therefore
depends only on ``(spec, seed)``; Monte Carlo runs derive one path seed per run
from the master seed (see :func:`path_seeds`).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .cost import CostFunction, cost_from_dict

DEFAULT_GRID_STEP = 0.001
ALIGN_RTOL = 1e-9


def grid_index(value: float, step: float) -> int | None:
    """Integer ``n`` with ``value == n * step`` (to ALIGN_RTOL), else None."""
    q = value / step
    n = round(q)
    if abs(q - n) <= ALIGN_RTOL * max(1.0, abs(q)):
        return int(n)
    return None


def discrete_uniform_variance(n_points: int, step: float) -> float:
    """Variance of the uniform law on ``n_points`` points spaced ``step`` apart."""
    return step * step * (n_points * n_points - 1) / 12.0


@dataclass(frozen=True, eq=False)
class DemandSpec:
    means: np.ndarray
    half_width: float = 0.0
    grid_step: float = DEFAULT_GRID_STEP
    variances: np.ndarray | None = None

    def __post_init__(self):
        means = np.array(self.means, dtype=float).reshape(-1)
        if means.size == 0:
            raise ValueError("demand horizon must contain at least one period")
        if not np.all(np.isfinite(means)):
            raise ValueError("demand means must be finite")
        if self.half_width < 0:
            raise ValueError(f"half width must be non-negative, got {self.half_width}")
        if not self.grid_step > 0:
            raise ValueError(f"grid step must be positive, got {self.grid_step}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "grid_step", float(self.grid_step))
        if self.variances is None:
            var = np.full(means.size, self.exact_variance)
        else:
            var = np.array(self.variances, dtype=float).reshape(-1)
            if var.size != means.size:
                raise ValueError("variances and means differ in length")
            if np.any(var < 0):
                raise ValueError("variances must be non-negative")
        object.__setattr__(self, "variances", var)
        means.setflags(write=False)
        var.setflags(write=False)

    @classmethod
    def from_covariance(cls, means, covariance, half_width=0.0,
                        grid_step=DEFAULT_GRID_STEP) -> "DemandSpec":
        """Build from a full covariance matrix; only diagonal matrices are accepted."""
        cov = np.asarray(covariance, dtype=float)
        n = len(np.atleast_1d(means))
        if cov.shape != (n, n):
            raise ValueError(f"covariance must be {n}x{n}, got shape {cov.shape}")
        off = cov - np.diag(np.diag(cov))
        if np.any(off != 0):
            i, j = map(int, np.argwhere(off != 0)[0])
            raise ValueError(
                f"correlated demand is not supported (covariance[{i}][{j}] = {cov[i, j]})"
            )
        return cls(means, half_width, grid_step, np.diag(cov).copy())

    @property
    def horizon(self) -> int:
        return int(self.means.size)

    @property
    def support_size(self) -> int:
        """Number of support points (requires ``2 * delta`` on the grid)."""
        span = grid_index(2.0 * self.half_width, self.grid_step)
        if span is None:
            raise ValueError(
                f"support width {2 * self.half_width} is not a multiple of "
                f"grid step {self.grid_step}"
            )
        return span + 1

    @property
    def exact_variance(self) -> float:
        span = grid_index(2.0 * self.half_width, self.grid_step)
        if span is None:
            return float("nan")
        return discrete_uniform_variance(span + 1, self.grid_step)

    def offsets(self) -> np.ndarray:
        """Support points relative to the mean, ascending."""
        n = self.support_size
        return (np.arange(n) - (n - 1) / 2.0) * self.grid_step

    def support(self, k: int) -> np.ndarray:
        return self.means[k] + self.offsets()

    def upper(self) -> np.ndarray:
        return self.means + self.half_width

    def to_dict(self) -> dict[str, Any]:
        return {
            "N": self.horizon,
            "mu": self.means.tolist(),
            "delta": self.half_width,
            "grid_step": self.grid_step,
            "sigma2": self.variances.tolist(),
        }


@dataclass(frozen=True, eq=False)
class InventoryProblem:
    cost: CostFunction
    demand: DemandSpec
    x0: float = 0.0
    x_max: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.x0 < 0:
            raise ValueError(f"initial buffer must be non-negative, got {self.x0}")
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def horizon(self) -> int:
        return self.demand.horizon

    @property
    def means(self) -> np.ndarray:
        return self.demand.means

    @property
    def delta(self) -> float:
        return self.demand.half_width

    def to_dict(self) -> dict[str, Any]:
        out = {"schema_version": 1, **self.demand.to_dict(), "x0": self.x0,
               "cost": self.cost.to_dict()}
        if self.x_max is not None:
            out["x_max"] = self.x_max
        if self.name:
            out["name"] = self.name
        return out


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int | None
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def raise_if_invalid(self) -> None:
        if self.violations:
            lines = "; ".join(v.message for v in self.violations)
            raise ValueError(f"invalid problem: {lines}")

    def to_dict(self):
        return {"ok": self.ok,
                "violations": [v.__dict__ for v in self.violations]}


def validate_spec(spec: DemandSpec) -> ValidationReport:
    report = ValidationReport()
    lower = spec.means - spec.half_width
    for k in np.nonzero(~(lower > 0))[0]:
        report.violations.append(Violation(
            "positive_demand", int(k),
            f"period {k}: mu - delta = {lower[k]:g} is not positive"))
    if grid_index(2.0 * spec.half_width, spec.grid_step) is None:
        report.violations.append(Violation(
            "grid_alignment", None,
            f"support width 2*delta = {2 * spec.half_width} is not a multiple of "
            f"grid step {spec.grid_step}"))
    else:
        true_var = spec.exact_variance
        for k, v in enumerate(spec.variances):
            if abs(v - true_var) > 1e-9 * max(abs(true_var), abs(v)):
                report.violations.append(Violation(
                    "variance_consistency", k,
                    f"period {k}: declared variance {v:g} differs from the discrete-uniform "
                    f"variance {true_var:g} of the grid support"))
    return report


def validate(problem: InventoryProblem | DemandSpec) -> ValidationReport:
    """Check the modelling assumptions; violations are reported, not raised."""
    if isinstance(problem, DemandSpec):
        return validate_spec(problem)
    report = validate_spec(problem.demand)
    if problem.x0 < 0:
        report.violations.append(Violation("initial_buffer", None, "x0 is negative"))
    return report


@dataclass(frozen=True, eq=False)
class DemandPath:
    values: np.ndarray
    seed: int

    def __len__(self):
        return len(self.values)


def sample_path(spec: DemandSpec, seed: int) -> DemandPath:
    validate_spec(spec).raise_if_invalid()
    seed = int(seed)
    offsets = spec.offsets()
    if offsets.size == 1:
        return DemandPath(spec.means.copy(), seed)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, offsets.size, size=spec.horizon)
    return DemandPath(spec.means + offsets[idx], seed)


def path_seeds(master_seed: int, n_runs: int) -> np.ndarray:
    """Per-run path seeds derived from a master seed via numpy's SeedSequence."""
    ss = np.random.SeedSequence(int(master_seed))
    return ss.generate_state(n_runs, dtype=np.uint64).astype(np.int64) & 0x7FFFFFFFFFFFFFFF


def sample_paths(spec: DemandSpec, seeds) -> np.ndarray:
    """Stack of sample paths, one row per seed."""
    return np.array([sample_path(spec, s).values for s in seeds]).reshape(len(seeds), spec.horizon)


def problem_from_dict(doc: dict[str, Any], base_dir: str | Path | None = None) -> InventoryProblem:
    """Build a problem from the JSON layout ``{N, mu, delta, grid_step, cost, x0}``."""
    if "cost" not in doc:
        raise ValueError("problem document lacks a 'cost' specification")
    if "mu" not in doc:
        raise ValueError("problem document lacks 'mu'")
    mu = np.asarray(doc["mu"], dtype=float)
    if "N" in doc and int(doc["N"]) != mu.size:
        raise ValueError(f"N = {doc['N']} but mu has {mu.size} entries")
    delta = float(doc.get("delta", 0.0))
    step = float(doc.get("grid_step", DEFAULT_GRID_STEP))
    if "Sigma" in doc:
        spec = DemandSpec.from_covariance(mu, doc["Sigma"], delta, step)
    else:
        spec = DemandSpec(mu, delta, step, doc.get("sigma2"))
    cost = cost_from_dict(doc["cost"], base_dir=base_dir)
    x_max = doc.get("x_max")
    return InventoryProblem(cost, spec, float(doc.get("x0", 0.0)),
                            None if x_max is None else float(x_max), str(doc.get("name", "")))


def load_problem(path: str | Path) -> InventoryProblem:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    return problem_from_dict(doc, base_dir=path.parent)


def fig3_like() -> InventoryProblem:
    """The shipped synthetic stand-in for the 50-period simulation scenario."""
    text = resources.files("loadshift").joinpath("data/fig3-like.json").read_text()
    return problem_from_dict(json.loads(text))


def write_path_csv(path: DemandPath, dest) -> None:
    with open(dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w"])
        for v in path.values:
            writer.writerow([repr(float(v))])
