"""Ordering cost curves G(u): compressor work as a function of heat removed.

Three variants are supported: ``quadratic`` (a*u**2), ``power`` (a*u**p, p > 1)
and ``tabulated`` (knots read from data, interpolated by a convexity-preserving
Hermite scheme). All of them are strictly convex and increasing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of a cost function."""


class ConvexityError(ValueError):
    """Tabulated knots fail the strict convexity / monotonicity certification.

    ``triple`` holds the indices of the offending consecutive knots, when the
    failure is a convexity one.
    """

    def __init__(self, message: str, triple: tuple[int, int, int] | None = None):
        super().__init__(message)
        self.triple = triple


class CurvatureBounds(NamedTuple):
    lower: float
    upper: float
    method: str


class CostFunction:
    """Base class. Subclasses implement ``_value``, ``_slope`` and ``curvature_bounds``."""

    kind: str = "abstract"

    @property
    def domain(self) -> tuple[float, float]:
        return 0.0, np.inf

    def _check_domain(self, u: np.ndarray) -> None:
        lo, hi = self.domain
        tol = 1e-12 * max(1.0, abs(lo), abs(hi) if np.isfinite(hi) else 1.0)
        if np.any(np.isnan(u)):
            raise DomainError("cost evaluated at NaN")
        if np.any(u < lo - tol) or np.any(u > hi + tol):
            bad = u[(u < lo - tol) | (u > hi + tol)]
            raise DomainError(
                f"{self.kind} cost evaluated outside its domain [{lo}, {hi}]: {bad[:5]}"
            )

    def __call__(self, u):
        arr = np.asarray(u, dtype=float)
        self._check_domain(np.atleast_1d(arr))
        out = self._value(arr)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, u):
        arr = np.asarray(u, dtype=float)
        self._check_domain(np.atleast_1d(arr))
        out = self._slope(arr)
        return float(out) if np.ndim(out) == 0 else out

    def total(self, u) -> float:
        """Sum of G over an order sequence."""
        return float(np.sum(self(np.asarray(u, dtype=float))))

    def _value(self, u: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _slope(self, u: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def curvature_bounds(self, u_lo: float, u_hi: float) -> CurvatureBounds:  # pragma: no cover
        raise NotImplementedError

    def _check_interval(self, u_lo: float, u_hi: float) -> None:
        if not u_lo <= u_hi:
            raise DomainError(f"inverted interval [{u_lo}, {u_hi}]")
        self._check_domain(np.array([u_lo, u_hi], dtype=float))

    def to_dict(self) -> dict[str, Any]:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class QuadraticCost(CostFunction):
    a: float
    kind: str = field(default="quadratic", init=False)

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"quadratic coefficient must be positive, got {self.a}")

    def _value(self, u):
        return self.a * u * u

    def _slope(self, u):
        return 2.0 * self.a * u

    def curvature_bounds(self, u_lo, u_hi):
        self._check_interval(u_lo, u_hi)
        c = 2.0 * self.a
        return CurvatureBounds(c, c, "analytic: G'' = 2a")

    def to_dict(self):
        return {"type": "quadratic", "a": self.a}


@dataclass(frozen=True)
class PowerCost(CostFunction):
    a: float
    p: float
    kind: str = field(default="power", init=False)

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"power-cost scale must be positive, got {self.a}")
        if not self.p > 1:
            raise ValueError(f"power-cost exponent must exceed 1, got {self.p}")

    def _value(self, u):
        return self.a * np.power(u, self.p)

    def _slope(self, u):
        return self.a * self.p * np.power(u, self.p - 1.0)

    def second_derivative(self, u):
        """G''(u); infinite at u = 0 when p < 2."""
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self.a * self.p * (self.p - 1.0) * np.power(u, self.p - 2.0)

    def curvature_bounds(self, u_lo, u_hi):
        self._check_interval(u_lo, u_hi)
        # G'' is monotone in u, so the extremes sit at the interval ends.
        if self.p == 2.0:
            c = 2.0 * self.a
            return CurvatureBounds(c, c, "analytic: G'' = 2a")
        ends = self.second_derivative(np.array([u_lo, u_hi]))
        return CurvatureBounds(float(ends.min()), float(ends.max()),
                               "analytic: G'' = a p (p-1) u^(p-2) at interval ends")

    def to_dict(self):
        return {"type": "power", "a": self.a, "p": self.p}


def certify_knots(u: np.ndarray, g: np.ndarray, rel_eps: float = 1e-9) -> None:
    """Raise ConvexityError unless the knots are strictly increasing and convex.

    Convexity is tested on the spacing-normalised second difference
    ``(s_i - s_{i-1}) * (h_{i-1} + h_i) / 2`` (the plain second difference on a
    uniform grid), which must exceed ``rel_eps * max|g|``.
    """
    if len(u) < 2:
        raise ConvexityError("a tabulated cost needs at least two knots")
    h = np.diff(u)
    if np.any(h <= 0):
        i = int(np.argmax(h <= 0))
        raise ConvexityError(f"knot abscissae not strictly increasing at index {i + 1}")
    dg = np.diff(g)
    if np.any(dg <= 0):
        i = int(np.argmax(dg <= 0))
        raise ConvexityError(
            f"knot ordinates not strictly increasing between knots {i} and {i + 1}"
        )
    slopes = dg / h
    eps = rel_eps * float(np.max(np.abs(g)))
    for i in range(1, len(u) - 1):
        second = (slopes[i] - slopes[i - 1]) * (h[i - 1] + h[i]) / 2.0
        if not second > eps:
            raise ConvexityError(
                f"knots ({i - 1}, {i}, {i + 1}) at u=({u[i - 1]:g}, {u[i]:g}, {u[i + 1]:g}) "
                f"are not strictly convex: second difference {second:.6g} <= {eps:.3g}",
                triple=(i - 1, i, i + 1),
            )


class TabulatedCost(CostFunction):
    """Cost curve through measured (u, g) knots.

    Between knots the curve is a cubic Hermite segment whose end slopes are the
    segment secant pulled down (left end) and up (right end) by the same amount
    ``e_i = min(adjacent slope jumps) / 2``. Each segment is then strictly
    convex, slopes never decrease across a knot, and the first slope stays
    positive, so the interpolant is strictly convex and increasing and passes
    through every knot.

    ``anchored`` requires the first knot to be (0, 0). Curves derived from
    property tables start at a positive heat level and are built unanchored.
    """

    kind = "tabulated"

    def __init__(self, u, g, anchored: bool = True, units: dict[str, str] | None = None):
        u = np.array(u, dtype=float)
        g = np.array(g, dtype=float)
        if u.shape != g.shape or u.ndim != 1:
            raise ValueError("knot abscissae and ordinates must be 1-D and equally long")
        certify_knots(u, g)
        if anchored and (u[0] != 0.0 or g[0] != 0.0):
            raise ConvexityError(
                f"anchored tabulated cost must start at knot (0, 0), got ({u[0]}, {g[0]})"
            )
        self.u = u
        self.g = g
        self.anchored = anchored
        self.units = dict(units or {})
        self.u.setflags(write=False)
        self.g.setflags(write=False)

        h = np.diff(u)
        s = np.diff(g) / h
        jumps = np.diff(s)  # slope jump at interior knot i+1
        n_seg = len(h)
        e = np.zeros(n_seg)
        for i in range(n_seg):
            cands = []
            if i >= 1:
                cands.append(jumps[i - 1])
            if i + 1 <= n_seg - 1:
                cands.append(jumps[i])
            if i == 0 and cands:
                cands.append(s[0])
            e[i] = 0.5 * min(cands) if cands else 0.0
        self._h = h
        self._s = s
        self._left = s - e
        self._right = s + e

    @property
    def domain(self):
        return float(self.u[0]), float(self.u[-1])

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.u.tolist(), self.g.tolist()))

    def _segment(self, u):
        i = np.clip(np.searchsorted(self.u, u, side="right") - 1, 0, len(self._h) - 1)
        t = np.clip((u - self.u[i]) / self._h[i], 0.0, 1.0)
        return i, t

    def _value(self, u):
        i, t = self._segment(u)
        h = self._h[i]
        t2, t3 = t * t, t * t * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return (h00 * self.g[i] + h10 * h * self._left[i]
                + h01 * self.g[i + 1] + h11 * h * self._right[i])

    def _slope(self, u):
        i, t = self._segment(u)
        t2 = t * t
        d00 = (6 * t2 - 6 * t) / self._h[i]
        d10 = 3 * t2 - 4 * t + 1
        d01 = (-6 * t2 + 6 * t) / self._h[i]
        d11 = 3 * t2 - 2 * t
        return (d00 * self.g[i] + d10 * self._left[i]
                + d01 * self.g[i + 1] + d11 * self._right[i])

    def knot_curvatures(self) -> np.ndarray:
        """Centered second-difference estimates of G'' at the interior knots."""
        h = self._h
        return 2.0 * np.diff(self._s) / (h[:-1] + h[1:])

    def curvature_bounds(self, u_lo, u_hi):
        self._check_interval(u_lo, u_hi)
        if len(self.u) < 3:
            raise ValueError("curvature estimation needs at least three knots")
        interior = self.u[1:-1]
        est = self.knot_curvatures()
        inside = (interior >= u_lo) & (interior <= u_hi)
        if not np.any(inside):
            # no interior knot in range: use the interior knots bracketing it
            lo_i = max(int(np.searchsorted(interior, u_lo)) - 1, 0)
            hi_i = min(int(np.searchsorted(interior, u_hi)), len(interior) - 1)
            inside = np.zeros(len(interior), dtype=bool)
            inside[lo_i:hi_i + 1] = True
        sel = est[inside]
        idx = np.nonzero(inside)[0] + 1
        method = (
            "estimate: centered second differences 2(s_i - s_{i-1})/(h_{i-1} + h_i) "
            f"at knots {idx[0]}..{idx[-1]}"
        )
        return CurvatureBounds(float(sel.min()), float(sel.max()), method)

    def to_dict(self):
        return {"type": "tabulated", "knots": [list(k) for k in self.knots],
                "anchored": self.anchored, "units": self.units}

    def __repr__(self):
        return f"TabulatedCost({len(self.u)} knots on [{self.u[0]:g}, {self.u[-1]:g}])"


def eval_cost(G: CostFunction, u):
    return G(u)


def curvature_bounds(G: CostFunction, u_lo: float, u_hi: float) -> CurvatureBounds:
    return G.curvature_bounds(u_lo, u_hi)


def read_cost_csv(path, anchored: bool = True,
                  units: dict[str, str] | None = None) -> TabulatedCost:
    """Load a two-column ``u,g`` CSV (header required)."""
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.lstrip().startswith("#"))
        header = [c.strip().lower() for c in next(reader, [])]
        if header[:2] != ["u", "g"]:
            raise ValueError(f"{path}: expected header 'u,g', got {header}")
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed row ({exc})") from None
    if data.size == 0:
        raise ValueError(f"{path}: no knots")
    return TabulatedCost(data[:, 0], data[:, 1], anchored=anchored, units=units)


def cost_from_dict(spec: dict[str, Any], base_dir: str | Path | None = None) -> CostFunction:
    """Build a cost function from its JSON description."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError("cost specification must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "quadratic":
        return QuadraticCost(float(spec["a"]))
    if kind == "power":
        return PowerCost(float(spec["a"]), float(spec["p"]))
    if kind == "tabulated":
        anchored = bool(spec.get("anchored", True))
        if "knots" in spec:
            knots = np.asarray(spec["knots"], dtype=float)
            return TabulatedCost(knots[:, 0], knots[:, 1], anchored=anchored,
                                 units=spec.get("units"))
        if "path" in spec:
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return read_cost_csv(path, anchored=anchored, units=spec.get("units"))
        raise ValueError("tabulated cost needs 'knots' or 'path'")
    raise ValueError(f"unknown cost type {kind!r}")
