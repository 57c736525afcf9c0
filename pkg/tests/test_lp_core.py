import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drmco.lp_core import (EQ, GE, LE, LinearProgram, MalformedProgram, export_mps, read_mps,
                           solve_lp)


def random_lp(rng, m, n, feasible=True):
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    x0 = rng.uniform(0, 2, size=n)
    senses = [[LE, GE, EQ][k] for k in rng.integers(0, 3, size=m)]
    rhs = A @ x0 if feasible else rng.uniform(-3, 3, size=m)
    for i, s in enumerate(senses):
        if s == LE:
            rhs[i] += rng.uniform(0, 1)
        elif s == GE:
            rhs[i] -= rng.uniform(0, 1)
    c = rng.integers(-2, 4, size=n).astype(float)
    lo = np.where(rng.random(n) < 0.2, -math.inf, 0.0)
    hi = np.where(rng.random(n) < 0.5, 3.0, math.inf)
    return LinearProgram(c, A, senses, rhs, lo, hi, constant=float(rng.integers(-2, 3)))


def test_single_variable_lower_bound():
    lp = LinearProgram.from_rows([1.0], [([1.0], GE, 1.0)], [(0.0, None)])
    sol = solve_lp(lp)
    assert sol.status == "Optimal"
    assert sol.primal[0] == pytest.approx(1.0)
    assert sol.objective_value == pytest.approx(1.0)
    assert sol.dual[0] == pytest.approx(1.0)


def test_unbounded_and_infeasible():
    assert solve_lp(LinearProgram.from_rows([-1.0], [], [(0.0, None)])).status == "Unbounded"
    lp = LinearProgram.from_rows([1.0], [([1.0], GE, 2.0), ([1.0], LE, 1.0)], [(0.0, None)])
    assert solve_lp(lp).status == "Infeasible"


def test_malformed_dimensions():
    with pytest.raises(MalformedProgram):
        LinearProgram.from_rows([1.0, 2.0], [([1.0], GE, 1.0)], [(0, None), (0, None)])
    lp = LinearProgram([1.0], [[1.0]], ["<>"], [1.0], [0.0], [1.0])
    with pytest.raises(MalformedProgram):
        solve_lp(lp)


def test_duals_are_rhs_sensitivities():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(60):
        lp = random_lp(rng, 4, 5)
        sol = solve_lp(lp)
        if not sol.optimal:
            continue
        h = 1e-6
        for i in range(lp.n_rows):
            bumped = LinearProgram(lp.objective, lp.A, lp.senses, lp.rhs + h * np.eye(lp.n_rows)[i],
                                   lp.lower, lp.upper, lp.constant)
            s2 = solve_lp(bumped)
            if s2.optimal:
                # one-sided difference agrees with some subgradient; nondegenerate rows match
                fd = (s2.objective_value - sol.objective_value) / h
                if abs(fd - sol.dual[i]) > 1e-4:
                    minus = LinearProgram(lp.objective, lp.A, lp.senses,
                                          lp.rhs - h * np.eye(lp.n_rows)[i], lp.lower, lp.upper,
                                          lp.constant)
                    s3 = solve_lp(minus)
                    bd = (sol.objective_value - s3.objective_value) / h if s3.optimal else fd
                    lo_, hi_ = sorted([fd, bd])
                    assert lo_ - 1e-4 <= sol.dual[i] <= hi_ + 1e-4
                checked += 1
    assert checked > 20


def test_strong_duality_on_random_lps():
    rng = np.random.default_rng(5)
    for _ in range(100):
        lp = random_lp(rng, 5, 6)
        a = solve_lp(lp)
        b = solve_lp(lp, backend="highs")
        assert a.status == b.status
        if a.optimal:
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-7, rel=1e-7)
            # primal feasibility of our solution
            r = lp.A @ a.primal
            for i, s in enumerate(lp.senses):
                if s == LE:
                    assert r[i] <= lp.rhs[i] + 1e-7
                elif s == GE:
                    assert r[i] >= lp.rhs[i] - 1e-7
                else:
                    assert r[i] == pytest.approx(lp.rhs[i], abs=1e-7)
            assert np.all(a.primal >= lp.lower - 1e-7) and np.all(a.primal <= lp.upper + 1e-7)


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 6), st.booleans())
def test_matches_highs(seed, m, n, feasible):
    lp = random_lp(np.random.default_rng(seed), m, n, feasible)
    a, b = solve_lp(lp), solve_lp(lp, backend="highs")
    assert a.status == b.status
    if a.optimal:
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-7, rel=1e-7)


def test_degenerate_cycling_example():
    # Beale's cycling example; Bland's rule fallback must terminate
    c = [-0.75, 150.0, -0.02, 6.0]
    rows = [([0.25, -60.0, -0.04, 9.0], LE, 0.0), ([0.5, -90.0, -0.02, 3.0], LE, 0.0),
            ([0.0, 0.0, 1.0, 0.0], LE, 1.0)]
    sol = solve_lp(LinearProgram.from_rows(c, rows, [(0.0, None)] * 4))
    assert sol.optimal
    assert sol.objective_value == pytest.approx(-0.05)


def test_mps_round_trip_and_cross_solver():
    highspy = pytest.importorskip("highspy")
    rng = np.random.default_rng(11)
    for k in range(10):
        lp = random_lp(rng, 4, 5)
        text = export_mps(lp, f"T{k}")
        back = read_mps(text)
        a, b = solve_lp(lp), solve_lp(back)
        assert a.status == b.status
        if a.optimal:
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-9)
        import tempfile, os
        with tempfile.NamedTemporaryFile("w", suffix=".mps", delete=False) as fh:
            fh.write(text)
        try:
            h = highspy.Highs()
            h.setOptionValue("output_flag", False)
            h.readModel(fh.name)
            h.run()
            status = h.modelStatusToString(h.getModelStatus())
            if a.optimal:
                assert status == "Optimal"
                assert h.getInfo().objective_function_value == pytest.approx(a.objective_value,
                                                                             abs=1e-7)
            elif a.status == "Infeasible":
                assert status == "Infeasible"
        finally:
            os.unlink(fh.name)
