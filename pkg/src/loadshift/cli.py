"""Command-line front end.

Every subcommand writes machine-readable artifacts plus ``manifest.json`` into
the output directory (``--out``, else ``$LOADSHIFT_OUTPUT_DIR``, else
``./loadshift-out``) and prints a short human summary on stdout. Invalid input
exits with status 2.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import re
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import bound_report
from .cost import ConvexityError, cost_from_dict
from .demand import fig3_like, load_problem, validate
from .deterministic import load_shift, read_demand_csv, write_trajectory
from .policies import POLICIES, dp_solve
from .sim import monte_carlo
from .thermo import build_G, case_study, read_series_csv, read_table_csv

DEFAULT_SEED = 20250201
OUTPUT_ENV = "LOADSHIFT_OUTPUT_DIR"
SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUTPUT_ENV) or "loadshift-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, args, outputs) -> None:
    config = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in sorted(vars(args).items()) if k != "func"}
    _write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "config": config,
        "outputs": sorted(Path(p).name for p in outputs),
        "versions": {"loadshift": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    })


def parse_duration(text: str) -> float:
    """Seconds in ``'24h'``, ``'90m'``, ``'3600s'``, ``'1d'`` or a bare number."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*([smhd]?)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}")
    scale = {"": 1, "s": 1, "m": 60, "h": 3600, "d": 86400}[m.group(2)]
    return float(m.group(1)) * scale


def _load_problem(arg: str):
    if arg == "fig3-like":
        return fig3_like()
    return load_problem(arg)


def cmd_loadshift(args) -> int:
    w = read_demand_csv(args.demands)
    cost = cost_from_dict(json.loads(args.cost)) if args.cost else None
    traj = load_shift(w, args.delta, args.x0)
    out = _out_dir(args)
    csv_path, json_path = out / "trajectory.csv", out / "trajectory.json"
    write_trajectory(traj, w, csv_path, json_path, cost)
    _manifest(out, args, [csv_path, json_path])
    nb = len(traj.blocks)
    print(f"{len(w)} periods, {nb} block{'s' if nb != 1 else ''}")
    for b in traj.blocks:
        print(f"  periods {b.start}..{b.stop - 1}: u = {b.value:.6g}")
    if cost is not None:
        print(f"total cost {traj.cost(cost):.6g}")
    return 0


def _policy_list(text: str) -> list[str]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    unknown = [p for p in names if p not in POLICIES]
    if unknown or not names:
        raise UsageError(f"unknown policy {', '.join(unknown) or '(none)'}; "
                         f"choose from {', '.join(POLICIES)}")
    return names


def cmd_simulate(args) -> int:
    names = _policy_list(args.policies)
    problem = _load_problem(args.problem)
    report = validate(problem)
    if not report.ok:
        raise ValueError("; ".join(v.message for v in report.violations))
    dp_kw = {"dx": args.dx, "x_max": args.x_max, "threads": args.threads}
    result = monte_carlo(problem, names, args.runs, args.seed, threads=args.threads,
                         dp_kwargs=dp_kw)
    out = _out_dir(args)
    files = result.write(out)
    _manifest(out, args, files)
    print(result.summary())
    return 0


def cmd_dp(args) -> int:
    problem = _load_problem(args.problem)
    value = dp_solve(problem, x_max=args.x_max, dx=args.dx, threads=args.threads)
    out = _out_dir(args)
    files = value.to_csv(out / "value_function")
    j0 = float(value.value(0, problem.x0))
    summary = {"schema_version": SCHEMA_VERSION, "dx": value.dx, "x_max": value.x_max,
               "n_states": value.n_states, "horizon": value.horizon, "J0_x0": j0,
               "first_order": float(value.decide(0, problem.x0))}
    _write_json(out / "dp_summary.json", summary)
    _manifest(out, args, [out / "dp_summary.json", out / "value_function"])
    print(f"J_0({problem.x0:g}) = {j0:.6g} on {value.n_states} states (dx = {value.dx:g}); "
          f"{len(files)} period tables written")
    return 0


def cmd_bounds(args) -> int:
    problem = _load_problem(args.problem)
    rep = bound_report(problem)
    out = _out_dir(args)
    _write_json(out / "bounds.json", rep.to_dict())
    _manifest(out, args, [out / "bounds.json"])
    print(f"M = {rep.M:.6g}  S_mu = {rep.S_mu:.6g}  S_u (literal) = {rep.S_u_literal:.6g}  "
          f"S_u (heuristic) = {rep.S_u_heuristic:.6g}  var sum = {rep.variance_sum:.6g}")
    print(f"curvature l = {rep.l:.6g}, L = {rep.L:.6g} on [{rep.curvature_interval[0]:g}, "
          f"{rep.curvature_interval[1]:g}]")
    print(f"myopic - optimal >= {rep.lb_myopic_gap_literal:.6g} (literal), "
          f"{rep.lb_myopic_gap_heuristic:.6g} (heuristic)")
    print(f"lsh - optimal <= {rep.ub_heuristic_gap_heuristic:.6g} (heuristic), "
          f"{rep.ub_heuristic_gap_literal:.6g} (literal)")
    return 0


def cmd_casestudy(args) -> int:
    series = read_series_csv(args.series)
    table = read_table_csv(args.table)
    report = case_study(series, table, args.window)
    out = _out_dir(args)
    files = report.write(out)
    _manifest(out, args, files)
    p = report.pooled
    print(f"{len(report.windows)} windows of {args.window:g}s "
          f"({report.dropped_samples} trailing samples dropped)")
    print(f"pooled Var(P): {p['var_P']:.6g} -> {p['var_P_opt']:.6g}; "
          f"Var(u): {p['var_u']:.6g} -> {p['var_u_opt']:.6g}")
    return 0


def cmd_thermo_check(args) -> int:
    table = read_table_csv(args.table)
    G = build_G(table)
    curv = G.curvature_bounds(*G.domain) if len(G.u) >= 3 else None
    out = _out_dir(args)
    doc = {"schema_version": SCHEMA_VERSION, "certified_convex": True,
           "discharge_pressure": table.discharge_pressure, "knots": [list(k) for k in G.knots],
           "domain": list(G.domain),
           "curvature": None if curv is None else {"l": curv.lower, "L": curv.upper,
                                                   "method": curv.method}}
    _write_json(out / "thermo.json", doc)
    _manifest(out, args, [out / "thermo.json"])
    print(f"G certified strictly convex on [{G.domain[0]:g}, {G.domain[1]:g}] "
          f"from {len(G.u)} knots")
    if curv is not None:
        print(f"estimated G'' range: [{curv.lower:.6g}, {curv.upper:.6g}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadshift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker cap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("loadshift", parents=[common], help="optimal schedule for known demands")
    p.add_argument("demands", type=Path, help="single-column demand CSV")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--cost", default=None, help='cost JSON, e.g. \'{"type":"quadratic","a":100}\'')
    p.set_defaults(func=cmd_loadshift)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo policy comparison")
    p.add_argument("problem", nargs="?", default="fig3-like",
                   help="problem JSON, or 'fig3-like' for the shipped scenario")
    p.add_argument("--policies", default="dp,lsh,rhh,myopic")
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--x-max", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dp", parents=[common], help="solve and export the value function")
    p.add_argument("problem", nargs="?", default="fig3-like")
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--x-max", type=float, default=None)
    p.set_defaults(func=cmd_dp)

    p = sub.add_parser("bounds", parents=[common], help="performance bounds report")
    p.add_argument("problem", nargs="?", default="fig3-like")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("casestudy", parents=[common], help="hindsight suction-pressure study")
    p.add_argument("series", type=Path, help="timestamp,pressure_pa CSV")
    p.add_argument("table", type=Path, help="P_s,h1,h2,h5 property CSV")
    p.add_argument("--window", type=parse_duration, default=86400.0, help="e.g. 24h")
    p.set_defaults(func=cmd_casestudy)

    p = sub.add_parser("thermo-check", parents=[common], help="certify a property table")
    p.add_argument("table", type=Path)
    p.set_defaults(func=cmd_thermo_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvexityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.triple is not None:
            print(f"offending knots: {exc.triple}", file=sys.stderr)
        return 2
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
