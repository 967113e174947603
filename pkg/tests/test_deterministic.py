import json

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from loadshift.cost import PowerCost, QuadraticCost
from loadshift.deterministic import (concave_majorant_oracle, convex_solve_oracle, load_shift,
                                     read_demand_csv, write_trajectory)

from conftest import grid_demands


@pytest.mark.parametrize("w, delta, x, expected", [
    ([2, 2, 2], 0, 0, [2, 2, 2]),
    ([1, 2, 3], 0, 0, [2, 2, 2]),
    ([3, 1, 2], 0, 0, [3, 1.5, 1.5]),
    ([2, 2], 0, 1, [1.5, 1.5]),
    ([1, 1], 0.5, 0, [1.5, 1.0]),
    ([3, 2, 1], 0, 0, [3, 2, 1]),
])
def test_worked_schedules(w, delta, x, expected):
    traj = load_shift(w, delta, x)
    np.testing.assert_array_equal(traj.u, expected)
    np.testing.assert_array_equal(concave_majorant_oracle(w, delta, x).u, expected)
    np.testing.assert_allclose(convex_solve_oracle(w, delta, x, QuadraticCost(1.0)).u, expected,
                               rtol=1e-9)


def test_blocks_of_worked_example():
    traj = load_shift([3, 1, 2])
    assert [(b.start, b.stop, b.value) for b in traj.blocks] == [(0, 1, 3.0), (1, 3, 1.5)]


def test_oracle_costs():
    assert convex_solve_oracle([1, 3], 0, 0, QuadraticCost(100.0)).cost(QuadraticCost(100.0)) \
        == pytest.approx(800.0, rel=1e-12)
    G = QuadraticCost(1.0)
    assert convex_solve_oracle([2, 2], 0, 1, G).cost(G) == pytest.approx(4.5, rel=1e-12)
    P = PowerCost(1.0, 3.0)
    np.testing.assert_allclose(convex_solve_oracle([3, 2, 1], 0, 0, P).u, [3, 2, 1], rtol=1e-8)


def test_buffer_covering_everything():
    for x in (6.0, 6.5, 100.0):
        traj = load_shift([1, 2, 3], 0.0, x)
        np.testing.assert_array_equal(traj.u, 0.0)
        np.testing.assert_array_equal(concave_majorant_oracle([1, 2, 3], 0.0, x).u, 0.0)


def test_partial_buffer_spans_later_blocks():
    # residual averages -3, -1/2, 4/3, 5/4: first block has length 3
    w = [1, 2, 5, 1]
    traj = load_shift(w, 0.0, 4.0)
    np.testing.assert_array_equal(traj.u, [4 / 3, 4 / 3, 4 / 3, 1.0])
    np.testing.assert_array_equal(traj.u, concave_majorant_oracle(w, 0.0, 4.0).u)


def test_input_errors():
    for bad in ([], [1, -1]):
        with pytest.raises(ValueError):
            load_shift(bad)
    with pytest.raises(ValueError):
        load_shift([1, 2], -0.1)
    with pytest.raises(ValueError):
        load_shift([1, 2], 0.0, -1.0)


def check_invariants(w, delta, x, u):
    req = np.cumsum(w) + delta - x
    assert np.all(np.diff(u) <= 0), "orders must not increase"
    cum = np.cumsum(u)
    assert np.all(cum >= req - 1e-9 * (1 + np.abs(req))), "cumulative shortfall"
    assert cum[-1] == pytest.approx(max(0.0, req[-1]), rel=1e-12, abs=1e-12)


def check_block_tightness(w, delta, x, traj):
    req = np.cumsum(w) + delta - x
    cum = np.cumsum(traj.u)
    for b in traj.blocks:
        if b.value > 0:
            assert cum[b.stop - 1] == pytest.approx(req[b.stop - 1], rel=1e-12, abs=1e-12)


demands = st.lists(st.integers(0, 3000), min_size=1, max_size=20).map(
    lambda xs: np.array(xs) * 0.001)
steps = st.integers(0, 500).map(lambda i: i * 0.001)


@settings(max_examples=300, deadline=None)
@given(demands, steps, steps)
def test_greedy_equals_majorant(w, delta, x):
    a = load_shift(w, delta, x)
    b = concave_majorant_oracle(w, delta, x)
    np.testing.assert_array_equal(a.u, b.u)
    check_invariants(w, delta, x, a.u)
    check_block_tightness(w, delta, x, a)


@settings(max_examples=60, deadline=None)
@given(demands, steps, steps, st.sampled_from([QuadraticCost(3.0), PowerCost(1.0, 2.5)]))
def test_greedy_matches_numerical_optimum(w, delta, x, G):
    assume(w.sum() + delta - x > 1e-6)
    ls = load_shift(w, delta, x)
    ref = convex_solve_oracle(w, delta, x, G)
    assert ls.cost(G) == pytest.approx(ref.cost(G), rel=1e-7)


def test_trajectory_independent_of_cost(rng):
    for _ in range(25):
        w = grid_demands(rng, int(rng.integers(2, 12)))
        a = convex_solve_oracle(w, 0.0, 0.0, QuadraticCost(5.0)).u
        b = convex_solve_oracle(w, 0.0, 0.0, PowerCost(2.0, 1.7)).u
        np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-7 * w.max())


def test_demand_csv_with_and_without_header(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("w\n1\n2\n3\n")
    np.testing.assert_array_equal(read_demand_csv(p), [1, 2, 3])
    p.write_text("0.5\n0.25\n")
    np.testing.assert_array_equal(read_demand_csv(p), [0.5, 0.25])
    p.write_text("w\n1\nabc\n")
    with pytest.raises(ValueError):
        read_demand_csv(p)


def test_trajectory_files(tmp_path):
    w = [1.0, 2.0, 3.0]
    traj = load_shift(w)
    write_trajectory(traj, w, tmp_path / "t.csv", tmp_path / "t.json", QuadraticCost(100.0))
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "k,w,u,x"
    assert len(lines) == 4
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["u"] == [2.0, 2.0, 2.0] and doc["cost"] == pytest.approx(1200.0)
