import numpy as np
import pytest
from hypothesis import given, strategies as st

from drmco.ambiguity import (DimensionMismatch, FullSimplex, Singleton, WassersteinBall, from_json,
                             membership, to_json, wasserstein_distance, worst_case_distribution)
from drmco.lp_core import LinearProgram, solve_lp


def brute_force_wc(amb, v):
    """Maximize p @ v over the ball by an independent LP in (p, u) with HiGHS."""
    n = amb.size
    nv = n + n * n
    rows = []
    for m in range(n):
        a = np.zeros(nv); a[m] = -1; a[n + m * n: n + (m + 1) * n] = 1
        rows.append((a, "=", 0.0))
    for k in range(n):
        a = np.zeros(nv); a[n + k::n] = 1
        rows.append((a, "=", amb.p_hat[k]))
    a = np.zeros(nv); a[n:] = amb.dist.reshape(-1)
    rows.append((a, "<=", amb.sigma))
    c = np.zeros(nv); c[:n] = -v
    sol = solve_lp(LinearProgram.from_rows(c, rows, [(0, None)] * nv), backend="highs")
    return -sol.objective_value


def test_singleton_and_simplex_examples():
    wc = worst_case_distribution(Singleton([0.5, 0.5]), [1.0, 3.0])
    assert wc.value == pytest.approx(2.0)
    wc = worst_case_distribution(FullSimplex(3), [1.0, 3.0, 3.0])
    assert wc.value == 3.0
    np.testing.assert_array_equal(wc.p_star, [0.0, 1.0, 0.0])


def test_zero_radius_ball_is_singleton():
    p = np.array([0.2, 0.5, 0.3])
    dist = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    v = np.array([3.0, -1.0, 2.0])
    ball = WassersteinBall(p, dist, 0.0)
    assert worst_case_distribution(ball, v).value == pytest.approx(p @ v, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        worst_case_distribution(FullSimplex(2), [1.0, 2.0, 3.0])


@st.composite
def balls(draw):
    n = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 10_000))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, size=(n, 2))
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    dist = 0.5 * (dist + dist.T)
    beta = draw(st.floats(0, 0.5))
    return WassersteinBall.relative(rng.dirichlet(np.ones(n)), dist, beta), rng.normal(size=n)


@given(balls())
def test_wasserstein_worst_case_matches_brute_force(case):
    amb, v = case
    wc = worst_case_distribution(amb, v)
    assert wc.value == pytest.approx(brute_force_wc(amb, v), abs=1e-8)
    assert membership(amb, wc.p_star)
    assert wc.value >= amb.p_hat @ v - 1e-10
    assert wc.value <= v.max() + 1e-10


@given(balls(), st.floats(0.0, 1.0))
def test_worst_case_monotone_in_radius(case, extra):
    amb, v = case
    bigger = WassersteinBall(amb.p_hat, amb.dist, amb.sigma + extra)
    assert worst_case_distribution(bigger, v).value >= worst_case_distribution(amb, v).value - 1e-9


def test_distance_and_membership():
    dist = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert wasserstein_distance([1, 0], [0, 1], dist) == pytest.approx(2.0)
    ball = WassersteinBall([0.5, 0.5], dist, 0.5)
    assert membership(ball, [0.75, 0.25])
    assert not membership(ball, [1.0, 0.0])
    assert membership(FullSimplex(2), [1.0, 0.0])
    assert not membership(Singleton([0.5, 0.5]), [1.0, 0.0])


def test_json_round_trip():
    dist = np.array([[0.0, 1.0], [1.0, 0.0]])
    for amb in (Singleton([0.3, 0.7]), FullSimplex(4), WassersteinBall([0.5, 0.5], dist, 0.1)):
        back = from_json(to_json(amb))
        assert type(back) is type(amb)
        assert back.size == amb.size
    rel = from_json({"kind": "wasserstein", "p_hat": [0.5, 0.5], "dist": dist.tolist(), "beta": 0.1})
    assert rel.sigma == pytest.approx(0.2)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        Singleton([0.5, 0.6])
    with pytest.raises(ValueError):
        WassersteinBall([0.5, 0.5], [[0, 1], [2, 0]], 0.1)
    with pytest.raises(ValueError):
        from_json({"kind": "box"})
