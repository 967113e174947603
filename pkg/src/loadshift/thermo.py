"""Work-heat curves from refrigerant property tables, and the hindsight case study.

A property table lists, at one fixed discharge pressure, the suction pressure
and the enthalpies h1 (evaporator outlet), h2 (compressor outlet) and h5
(evaporator inlet). Specific work is ``W = h2 - h1`` and specific heat
absorption is ``H = h1 - h5``; both fall as suction pressure rises. Between
rows, W and H are linear in suction pressure, which makes ``invert_H`` an
exact inverse of ``H``.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from .cost import TabulatedCost
from .deterministic import Block, load_shift


@dataclass(frozen=True, eq=False)
class RefrigerantTable:
    suction_pressure: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h5: np.ndarray
    discharge_pressure: float | None = None

    def __post_init__(self):
        cols = [np.array(c, dtype=float).reshape(-1) for c in
                (self.suction_pressure, self.h1, self.h2, self.h5)]
        if len({c.size for c in cols}) != 1:
            raise ValueError("property table columns differ in length")
        if cols[0].size < 2:
            raise ValueError("property table needs at least two rows")
        for name, c in zip(("suction_pressure", "h1", "h2", "h5"), cols):
            c.setflags(write=False)
            object.__setattr__(self, name, c)
        P = self.suction_pressure
        if np.any(np.diff(P) <= 0):
            i = int(np.argmax(np.diff(P) <= 0)) + 1
            raise ValueError(f"suction pressure not strictly increasing at row {i}")
        W, H = self.work, self.heat
        for label, arr in (("W = h2 - h1", W), ("H = h1 - h5", H)):
            if np.any(arr <= 0):
                raise ValueError(f"{label} must be positive (row {int(np.argmax(arr <= 0))})")
            if np.any(np.diff(arr) >= 0):
                i = int(np.argmax(np.diff(arr) >= 0)) + 1
                raise ValueError(f"{label} must strictly decrease with suction pressure (row {i})")

    @property
    def work(self) -> np.ndarray:
        return self.h2 - self.h1

    @property
    def heat(self) -> np.ndarray:
        return self.h1 - self.h5

    @property
    def pressure_range(self) -> tuple[float, float]:
        return float(self.suction_pressure[0]), float(self.suction_pressure[-1])

    @property
    def heat_range(self) -> tuple[float, float]:
        H = self.heat
        return float(H[-1]), float(H[0])

    def _check_pressure(self, P: np.ndarray) -> None:
        lo, hi = self.pressure_range
        tol = 1e-12 * hi
        if np.any(P < lo - tol) or np.any(P > hi + tol):
            raise ValueError(f"suction pressure outside table range [{lo:g}, {hi:g}] Pa")

    def W(self, P):
        P = np.asarray(P, dtype=float)
        self._check_pressure(np.atleast_1d(P))
        return np.interp(P, self.suction_pressure, self.work)

    def H(self, P):
        P = np.asarray(P, dtype=float)
        self._check_pressure(np.atleast_1d(P))
        return np.interp(P, self.suction_pressure, self.heat)


def invert_H(table: RefrigerantTable, u):
    """Suction pressure giving specific heat absorption ``u``."""
    u = np.asarray(u, dtype=float)
    lo, hi = table.heat_range
    tol = 1e-12 * hi
    if np.any(u < lo - tol) or np.any(u > hi + tol):
        raise ValueError(f"heat absorption outside table range [{lo:g}, {hi:g}]")
    # H decreases in P, so interpolate on the reversed columns
    out = np.interp(u, table.heat[::-1], table.suction_pressure[::-1])
    return float(out) if out.ndim == 0 else out


def build_G(table: RefrigerantTable) -> TabulatedCost:
    """Knots (H(P), W(P)) for each row, sorted by heat; convexity is certified."""
    H, W = table.heat, table.work
    order = np.argsort(H)
    return TabulatedCost(H[order], W[order], anchored=False,
                         units={"u": "kJ/kg", "g": "kJ/kg"})


_DP_RE = re.compile(r"discharge_pressure(?:_pa)?\s*[:=]\s*([0-9.eE+-]+)")


def read_table_csv(path, discharge_pressure: float | None = None) -> RefrigerantTable:
    """Load a ``P_s,h1,h2,h5`` CSV (Pa, kJ/kg). A ``# discharge_pressure_pa: ...``
    comment line sets the discharge pressure."""
    rows = []
    header = None
    with open(path, newline="") as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                m = _DP_RE.search(s)
                if m and discharge_pressure is None:
                    discharge_pressure = float(m.group(1))
                continue
            cells = next(csv.reader([s]))
            if header is None:
                header = [c.strip() for c in cells]
                if header[:4] != ["P_s", "h1", "h2", "h5"]:
                    raise ValueError(f"{path}: expected header 'P_s,h1,h2,h5', got {header}")
                continue
            try:
                rows.append([float(c) for c in cells[:4]])
            except ValueError:
                raise ValueError(f"{path}: malformed row {s!r}") from None
            if len(cells) < 4:
                raise ValueError(f"{path}: short row {s!r}")
    if header is None or not rows:
        raise ValueError(f"{path}: empty property table")
    a = np.array(rows)
    return RefrigerantTable(a[:, 0], a[:, 1], a[:, 2], a[:, 3], discharge_pressure)


def ammonia_like_table() -> RefrigerantTable:
    """The shipped synthetic ammonia-like table (not equation-of-state data)."""
    ref = resources.files("loadshift").joinpath("data/ammonia_like_table.csv")
    with resources.as_file(ref) as p:
        return read_table_csv(p)


@dataclass(frozen=True, eq=False)
class PressureSeries:
    timestamps: np.ndarray  # seconds
    pressures: np.ndarray   # Pa

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float).reshape(-1)
        p = np.array(self.pressures, dtype=float).reshape(-1)
        if t.size != p.size:
            raise ValueError("timestamps and pressures differ in length")
        if t.size < 2:
            raise ValueError("pressure series needs at least two samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "pressures", p)

    @property
    def interval(self) -> float:
        return float(np.median(np.diff(self.timestamps)))

    def check_uniform(self, rtol: float = 0.01) -> None:
        dt = np.diff(self.timestamps)
        nominal = self.interval
        dev = np.abs(dt - nominal) / nominal
        if np.any(dev > rtol):
            i = int(np.argmax(dev))
            raise ValueError(
                f"irregular sampling: step {i} is {dt[i]:g}s against nominal {nominal:g}s "
                f"(> {rtol:.0%}); resample to a uniform grid first")


def _parse_time(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return datetime.fromisoformat(cell.strip()).timestamp()


def read_series_csv(path) -> PressureSeries:
    """``timestamp,pressure_pa`` CSV; timestamps are seconds or ISO-8601."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows or [c.strip() for c in rows[0][:2]] != ["timestamp", "pressure_pa"]:
        raise ValueError(f"{path}: expected header 'timestamp,pressure_pa'")
    try:
        t = [_parse_time(r[0]) for r in rows[1:]]
        p = [float(r[1]) for r in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed row ({exc})") from None
    return PressureSeries(np.array(t), np.array(p))


def write_series_csv(series: PressureSeries, dest) -> None:
    with open(dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "pressure_pa"])
        for t, p in zip(series.timestamps, series.pressures):
            writer.writerow([repr(float(t)), repr(float(p))])


def synthetic_series(days: int = 30, interval: float = 900.0, base: float = 2.6e5,
                     swing: float = 2.0e4, dip: float = 7.0e4, noise: float = 3.0e3,
                     seed: int = 0) -> PressureSeries:
    """Suction-pressure series with a smooth daily cycle and a midday dip."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(days * 86400 / interval))) * interval
    hour = (t % 86400) / 3600.0
    p = (base + swing * np.cos(2 * np.pi * (hour - 3.0) / 24.0)
         - dip * np.exp(-0.5 * ((hour - 13.0) / 1.5) ** 2)
         + noise * rng.standard_normal(t.size))
    return PressureSeries(t, p)


@dataclass
class WindowResult:
    index: int
    start: float
    pressure: np.ndarray
    pressure_opt: np.ndarray
    heat: np.ndarray
    heat_opt: np.ndarray
    blocks: list[Block]

    @property
    def var_pressure(self) -> float:
        return float(np.var(self.pressure))

    @property
    def var_pressure_opt(self) -> float:
        return float(np.var(self.pressure_opt))

    @property
    def var_heat(self) -> float:
        return float(np.var(self.heat))

    @property
    def var_heat_opt(self) -> float:
        return float(np.var(self.heat_opt))

    @property
    def conservation_error(self) -> float:
        """Relative mismatch of total heat absorbed, original vs optimised."""
        total = float(np.sum(self.heat))
        return abs(float(np.sum(self.heat_opt)) - total) / total

    def summary(self) -> dict:
        return {
            "window": self.index, "start": self.start, "samples": int(self.pressure.size),
            "var_P": self.var_pressure, "var_P_opt": self.var_pressure_opt,
            "var_u": self.var_heat, "var_u_opt": self.var_heat_opt,
            "sum_u": float(np.sum(self.heat)), "sum_u_opt": float(np.sum(self.heat_opt)),
            "conservation_rel_error": self.conservation_error, "blocks": len(self.blocks),
        }


@dataclass
class CaseReport:
    window_seconds: float
    interval: float
    windows: list[WindowResult]
    dropped_samples: int
    pooled: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "window_seconds": self.window_seconds,
            "sample_interval": self.interval,
            "windows": [w.summary() for w in self.windows],
            "dropped_trailing_samples": self.dropped_samples,
            "pooled": self.pooled,
        }

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / "windows.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window", "k", "P", "P_opt", "u", "u_opt"])
            for w in self.windows:
                for k in range(w.pressure.size):
                    writer.writerow([w.index, k, repr(float(w.pressure[k])),
                                     repr(float(w.pressure_opt[k])), repr(float(w.heat[k])),
                                     repr(float(w.heat_opt[k]))])
        json_path = directory / "summary.json"
        json_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return [csv_path, json_path]


def case_study(series: PressureSeries, table: RefrigerantTable,
               window: float = 86400.0) -> CaseReport:
    """Hindsight-optimal schedule per window, with the original heat as the load."""
    series.check_uniform()
    table._check_pressure(series.pressures)
    interval = series.interval
    per_window = int(round(window / interval))
    if per_window < 1:
        raise ValueError("window shorter than the sampling interval")
    n_windows = series.pressures.size // per_window
    if n_windows < 1:
        raise ValueError(f"series spans less than one {window:g}s window")
    results = []
    for i in range(n_windows):
        sl = slice(i * per_window, (i + 1) * per_window)
        P = series.pressures[sl]
        u = np.asarray(table.H(P))
        traj = load_shift(u, 0.0, 0.0)
        P_opt = np.asarray(invert_H(table, traj.u))
        results.append(WindowResult(i, float(series.timestamps[sl][0]), P, P_opt, u,
                                    traj.u, traj.blocks))
    allP = np.concatenate([w.pressure for w in results])
    allP_opt = np.concatenate([w.pressure_opt for w in results])
    pooled = {
        "var_P": float(np.var(allP)), "var_P_opt": float(np.var(allP_opt)),
        "mean_window_var_P": float(np.mean([w.var_pressure for w in results])),
        "mean_window_var_P_opt": float(np.mean([w.var_pressure_opt for w in results])),
        "var_u": float(np.var(np.concatenate([w.heat for w in results]))),
        "var_u_opt": float(np.var(np.concatenate([w.heat_opt for w in results]))),
    }
    dropped = series.pressures.size - n_windows * per_window
    return CaseReport(float(window), interval, results, dropped, pooled)
