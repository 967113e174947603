import json
import subprocess
import sys

import numpy as np
import pytest

from loadshift.cli import main, parse_duration
from loadshift.thermo import PressureSeries, synthetic_series, write_series_csv

SHIPPED_TABLE = "src/loadshift/data/ammonia_like_table.csv"


@pytest.fixture
def table_path(request):
    return request.config.rootpath / SHIPPED_TABLE


def write_problem(path, mu, delta=0.0, step=1.0, cost=None):
    doc = {"N": len(mu), "mu": mu, "delta": delta, "grid_step": step}
    if cost is not False:
        doc["cost"] = cost or {"type": "quadratic", "a": 100}
    path.write_text(json.dumps(doc))
    return path


def read_json(path):
    return json.loads(path.read_text())


def test_loadshift_constant_file(tmp_path):
    (tmp_path / "w.csv").write_text("w\n0.4\n0.4\n0.4\n0.4\n")
    assert main(["loadshift", str(tmp_path / "w.csv"), "--out", str(tmp_path / "o")]) == 0
    assert read_json(tmp_path / "o" / "trajectory.json")["u"] == [0.4] * 4


def test_loadshift_ramp(tmp_path, capsys):
    (tmp_path / "w.csv").write_text("1\n2\n3\n")
    rc = main(["loadshift", str(tmp_path / "w.csv"), "--out", str(tmp_path / "o"),
               "--cost", '{"type": "quadratic", "a": 100}'])
    assert rc == 0
    doc = read_json(tmp_path / "o" / "trajectory.json")
    assert doc["u"] == [2.0, 2.0, 2.0] and doc["cost"] == 1200.0
    assert "total cost 1200" in capsys.readouterr().out
    manifest = read_json(tmp_path / "o" / "manifest.json")
    assert manifest["outputs"] == ["trajectory.csv", "trajectory.json"]
    assert manifest["command"] == "loadshift"


def test_loadshift_malformed_file(tmp_path, capsys):
    (tmp_path / "w.csv").write_text("w\n1\nx\n")
    assert main(["loadshift", str(tmp_path / "w.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_simulate_deterministic_problem(tmp_path):
    p = write_problem(tmp_path / "p.json", [1.0, 3.0])
    assert main(["simulate", str(p), "--runs", "10", "--out", str(tmp_path / "o")]) == 0
    rep = read_json(tmp_path / "o" / "report.json")
    assert rep["policies"]["myopic"]["mean"] == 1000.0
    assert rep["policies"]["lsh"]["mean"] == 1000.0
    assert rep["policies"]["dp"]["mean"] == 800.0
    assert rep["policies"]["rhh"]["mean"] == 800.0


def test_simulate_unknown_policy(tmp_path, capsys):
    p = write_problem(tmp_path / "p.json", [1.0, 3.0])
    rc = main(["simulate", str(p), "--policies", "dp,oracle", "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "oracle" in capsys.readouterr().err


def test_simulate_reruns_are_byte_identical(tmp_path):
    p = write_problem(tmp_path / "p.json", [0.3, 0.5, 0.2, 0.4], 0.1, 0.05)
    for d in ("a", "b"):
        assert main(["simulate", str(p), "--runs", "40", "--seed", "9",
                     "--out", str(tmp_path / d)]) == 0
    for name in ("report.json", "costs.csv", "trajectories.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    a, b = (read_json(tmp_path / d / "manifest.json") for d in ("a", "b"))
    assert a["outputs"] == b["outputs"] and a["versions"] == b["versions"]


@pytest.mark.slow
def test_simulate_shipped_scenario(tmp_path):
    assert main(["simulate", "--runs", "30", "--out", str(tmp_path)]) == 0
    rep = read_json(tmp_path / "report.json")
    assert set(rep["policies"]) == {"dp", "lsh", "rhh", "myopic"}
    assert rep["problem"]["N"] == 50


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LOADSHIFT_OUTPUT_DIR", str(tmp_path / "env"))
    p = write_problem(tmp_path / "p.json", [1.0, 3.0])
    assert main(["bounds", str(p)]) == 0
    assert (tmp_path / "env" / "bounds.json").exists()


def test_bounds_two_period(tmp_path):
    p = write_problem(tmp_path / "p.json", [1.0, 3.0])
    assert main(["bounds", str(p), "--out", str(tmp_path / "o")]) == 0
    doc = read_json(tmp_path / "o" / "bounds.json")
    assert doc["lb_myopic_gap_literal"] == 200.0
    assert doc["ub_heuristic_gap_heuristic"] == 200.0
    assert doc["ub_heuristic_gap_literal"] == 0.0


def test_bounds_constant_means(tmp_path):
    p = write_problem(tmp_path / "p.json", [2.0, 2.0, 2.0])
    assert main(["bounds", str(p), "--out", str(tmp_path / "o")]) == 0
    doc = read_json(tmp_path / "o" / "bounds.json")
    for key in ("lb_myopic_gap_literal", "ub_heuristic_gap_literal", "ub_heuristic_gap_heuristic",
                "S_mu", "S_u_literal", "S_u_heuristic"):
        assert doc[key] == 0.0


def test_bounds_missing_cost(tmp_path):
    p = write_problem(tmp_path / "p.json", [1.0, 3.0], cost=False)
    assert main(["bounds", str(p), "--out", str(tmp_path / "o")]) == 2


def test_missing_problem_file(tmp_path):
    assert main(["bounds", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_dp_command(tmp_path):
    p = write_problem(tmp_path / "p.json", [1.0, 3.0])
    assert main(["dp", str(p), "--out", str(tmp_path / "o")]) == 0
    doc = read_json(tmp_path / "o" / "dp_summary.json")
    assert doc["J0_x0"] == 800.0 and doc["first_order"] == 2.0
    assert (tmp_path / "o" / "value_function" / "period_0.csv").exists()


def test_casestudy_constant_series(tmp_path, table_path):
    s = PressureSeries(np.arange(96) * 900.0, np.full(96, 2.5e5))
    write_series_csv(s, tmp_path / "s.csv")
    rc = main(["casestudy", str(tmp_path / "s.csv"), str(table_path), "--window", "24h",
               "--out", str(tmp_path / "o")])
    assert rc == 0
    w = read_json(tmp_path / "o" / "summary.json")["windows"][0]
    assert w["var_P_opt"] == pytest.approx(w["var_P"], abs=1e-6)
    assert w["var_u_opt"] == pytest.approx(w["var_u"], abs=1e-12)


def test_casestudy_dip_series(tmp_path, table_path, capsys):
    write_series_csv(synthetic_series(days=3, seed=1), tmp_path / "s.csv")
    rc = main(["casestudy", str(tmp_path / "s.csv"), str(table_path), "--out", str(tmp_path / "o")])
    assert rc == 0
    pooled = read_json(tmp_path / "o" / "summary.json")["pooled"]
    assert pooled["var_P_opt"] < pooled["var_P"]
    assert "pooled Var(P)" in capsys.readouterr().out


def test_casestudy_out_of_range(tmp_path, table_path):
    s = PressureSeries(np.arange(96) * 900.0, np.full(96, 9e5))
    write_series_csv(s, tmp_path / "s.csv")
    assert main(["casestudy", str(tmp_path / "s.csv"), str(table_path),
                 "--out", str(tmp_path / "o")]) == 2


def test_thermo_check(tmp_path, table_path, capsys):
    assert main(["thermo-check", str(table_path), "--out", str(tmp_path / "o")]) == 0
    assert read_json(tmp_path / "o" / "thermo.json")["certified_convex"] is True
    bad = tmp_path / "bad.csv"
    bad.write_text("P_s,h1,h2,h5\n100000,1300,1600,100\n200000,1250,1530,100\n"
                   "300000,1200,1420,100\n400000,1150,1360,100\n")
    assert main(["thermo-check", str(bad), "--out", str(tmp_path / "o2")]) == 2
    assert "offending knots" in capsys.readouterr().err


def test_parse_duration():
    assert parse_duration("24h") == 86400.0
    assert parse_duration("90m") == 5400.0
    assert parse_duration("1d") == 86400.0
    assert parse_duration("3600") == 3600.0


def test_module_entry_point(tmp_path):
    (tmp_path / "w.csv").write_text("2\n2\n")
    out = subprocess.run([sys.executable, "-m", "loadshift", "loadshift", str(tmp_path / "w.csv"),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "2 periods, 1 block\n" in out.stdout
