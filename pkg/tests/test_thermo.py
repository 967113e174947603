import json

import numpy as np
import pytest

from loadshift.cost import ConvexityError
from loadshift.thermo import (PressureSeries, RefrigerantTable, ammonia_like_table, build_G,
                              case_study, invert_H, read_series_csv, read_table_csv,
                              synthetic_series, write_series_csv)


def table_from(P, H, W, h5=100.0):
    """Table with prescribed heat and work columns."""
    h5 = np.full(len(P), h5)
    h1 = h5 + np.asarray(H, dtype=float)
    return RefrigerantTable(P, h1, h1 + np.asarray(W, dtype=float), h5)


TWO_ROW = table_from([1e5, 2e5], [1200.0, 1150.0], [300.0, 250.0])


def convex_ten_row():
    # heat falls linearly with pressure; work is a convex increasing function of heat
    P = np.linspace(1e5, 4e5, 10)
    H = 1300.0 - 2e-4 * (P - 1e5)
    W = 150.0 + 0.002 * (H - 1200.0) ** 2 + 0.3 * (H - 1200.0)
    return table_from(P, H, W)


def test_two_row_knots():
    G = build_G(TWO_ROW)
    assert G.knots == [(1150.0, 250.0), (1200.0, 300.0)]
    assert G.domain == (1150.0, 1200.0)


def test_ten_row_table_certified():
    t = convex_ten_row()
    G = build_G(t)
    assert len(G.knots) == 10
    np.testing.assert_allclose(G(t.heat), t.work, rtol=1e-13)


def test_concave_row_rejected():
    t = convex_ten_row()
    H, W = t.heat, t.work.copy()
    W[4] -= 0.9 * (W[4] - W[5])  # pull one work value down toward its neighbour
    with pytest.raises(ConvexityError) as info:
        build_G(table_from(t.suction_pressure, H, W))
    # knots are sorted by heat, so row 4 becomes knot 5; the first triple it
    # breaks is the one centred on knot 4
    assert info.value.triple == (3, 4, 5)


def test_invert_heat():
    assert invert_H(TWO_ROW, 1175.0) == pytest.approx(1.5e5, rel=1e-15)
    t = convex_ten_row()
    for P, H in zip(t.suction_pressure, t.heat):
        assert invert_H(t, H) == pytest.approx(P, rel=1e-12)
    with pytest.raises(ValueError):
        invert_H(TWO_ROW, 1100.0)


def test_invert_round_trip_dense():
    t = ammonia_like_table()
    u = np.linspace(*t.heat_range, 20001)
    err = np.abs(t.H(invert_H(t, u)) - u)
    assert np.all(err <= 1e-9 * u)


def test_table_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        table_from([2e5, 1e5], [1200, 1150], [300, 250])
    with pytest.raises(ValueError, match="decrease"):
        table_from([1e5, 2e5], [1150, 1200], [300, 250])
    with pytest.raises(ValueError):
        TWO_ROW.W(5e5)


def test_table_csv(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# discharge_pressure_pa: 1.2e6\nP_s,h1,h2,h5\n"
                 "100000,1300,1600,100\n200000,1250,1500,100\n")
    t = read_table_csv(p)
    assert t.discharge_pressure == 1.2e6
    np.testing.assert_array_equal(t.heat, [1200, 1150])
    p.write_text("P,h1,h2,h5\n1,2,3,4\n")
    with pytest.raises(ValueError, match="header"):
        read_table_csv(p)


def test_shipped_table():
    t = ammonia_like_table()
    G = build_G(t)
    assert t.discharge_pressure == 1.5e6
    assert len(G.knots) >= 10
    lo, hi, _ = G.curvature_bounds(*G.domain)
    assert 0 < lo <= hi


def series(pressures, interval=900.0, start=0.0):
    p = np.asarray(pressures, dtype=float)
    return PressureSeries(start + np.arange(p.size) * interval, p)


def test_constant_window_is_a_fixed_point():
    t = ammonia_like_table()
    rep = case_study(series(np.full(96, 2.5e5)), t)
    w = rep.windows[0]
    np.testing.assert_allclose(w.heat_opt, w.heat, rtol=1e-15)
    np.testing.assert_allclose(w.pressure_opt, w.pressure, rtol=1e-12)
    assert w.var_pressure_opt == pytest.approx(w.var_pressure, abs=1e-6)


def test_dip_window():
    t = ammonia_like_table()
    hours = np.arange(96) / 4
    P = 2.8e5 - 8e4 * np.exp(-0.5 * ((hours - 13) / 1.5) ** 2)
    w = case_study(series(P), t).windows[0]
    assert w.var_pressure_opt <= w.var_pressure
    assert w.conservation_error <= 1e-12
    # a non-increasing optimal heat schedule means a non-decreasing pressure schedule
    assert np.all(np.diff(w.heat_opt) <= 0)
    assert np.all(np.diff(w.pressure_opt) >= -1e-6)


def test_identical_windows_identical_reports():
    t = ammonia_like_table()
    one_day = synthetic_series(days=1, seed=4).pressures
    rep = case_study(series(np.concatenate([one_day, one_day])), t)
    a, b = (w.summary() for w in rep.windows)
    a.pop("window"), b.pop("window"), a.pop("start"), b.pop("start")
    assert a == b


def test_trailing_partial_window_dropped():
    rep = case_study(series(np.full(100, 2.5e5)), ammonia_like_table())
    assert len(rep.windows) == 1 and rep.dropped_samples == 4


def test_bad_series_inputs():
    t = ammonia_like_table()
    with pytest.raises(ValueError, match="outside table range"):
        case_study(series(np.full(96, 9e5)), t)
    irregular = PressureSeries(np.r_[np.arange(95) * 900.0, 95 * 900.0 + 400], np.full(96, 2.5e5))
    with pytest.raises(ValueError, match="irregular"):
        case_study(irregular, t)
    with pytest.raises(ValueError):
        case_study(series(np.full(10, 2.5e5)), t)


def test_series_csv_round_trip(tmp_path):
    s = synthetic_series(days=1, seed=2)
    p = tmp_path / "s.csv"
    write_series_csv(s, p)
    again = read_series_csv(p)
    np.testing.assert_array_equal(again.pressures, s.pressures)
    p.write_text("timestamp,pressure_pa\n2025-01-01T00:00:00,250000\n2025-01-01T00:15:00,251000\n")
    assert read_series_csv(p).interval == 900.0


def test_report_files(tmp_path):
    rep = case_study(synthetic_series(days=2, seed=1), ammonia_like_table())
    csv_path, json_path = rep.write(tmp_path)
    assert csv_path.read_text().splitlines()[0] == "window,k,P,P_opt,u,u_opt"
    doc = json.loads(json_path.read_text())
    assert len(doc["windows"]) == 2 and "pooled" in doc
