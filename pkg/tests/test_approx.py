import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drmco.approx import (Cut, CutPool, EnvelopePoint, EnvelopePool, LipschitzViolation, add_cut,
                          add_envelope_point, eval_over, eval_under, load_pools_json,
                          pools_to_json)
from drmco.ambiguity import DimensionMismatch
from drmco.lp_core import LinearProgram, solve_lp


def per_cone_envelope(X, v, M, x):
    """conv of cones v_j + M||. - x_j||_1 at x, with one displacement per cone (HiGHS)."""
    J, d = X.shape
    # columns: mu (J), u+ (J*d), u- (J*d)
    n = J + 2 * J * d
    c = np.concatenate([v, np.full(2 * J * d, M)])
    rows = [(np.concatenate([np.ones(J), np.zeros(2 * J * d)]), "=", 1.0)]
    for i in range(d):
        a = np.zeros(n)
        a[:J] = X[:, i]
        a[J + i: J + J * d: d] = 1.0
        a[J + J * d + i:: d] = -1.0
        rows.append((a, "=", x[i]))
    sol = solve_lp(LinearProgram.from_rows(c, rows, [(0, None)] * n), backend="highs")
    return sol.objective_value if sol.optimal else math.inf


def test_floor_and_cuts():
    pool = CutPool(1, 1)
    assert eval_under(pool, [0.3]) == 0.0
    add_cut(pool, Cut([0.0], 1.0, [-2.0]))
    assert eval_under(pool, [0.0]) == 1.0
    assert eval_under(pool, [1.0]) == 0.0
    free = CutPool(1, 1, floor=None)
    assert eval_under(free, [0.0]) == -math.inf


def test_lipschitz_cap():
    pool = CutPool(1, 2, lipschitz=3.0)
    add_cut(pool, Cut([0, 0], 1.0, [3.0, -3.0]))
    with pytest.raises(LipschitzViolation):
        add_cut(pool, Cut([0, 0], 1.0, [3.1, 0.0]))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        eval_under(CutPool(1, 2), [0.0])


def test_envelope_examples():
    pool = EnvelopePool(1, 1, 5.0)
    assert eval_over(pool, [0.2]) == math.inf
    add_envelope_point(pool, EnvelopePoint([0.0], 1.0))
    assert eval_over(pool, [0.5]) == pytest.approx(3.5)
    add_envelope_point(pool, EnvelopePoint([1.0], 1.0))
    assert eval_over(pool, [0.5]) == pytest.approx(1.0)
    hull = EnvelopePool(1, 1, math.inf)
    add_envelope_point(hull, EnvelopePoint([0.0], 0.0))
    add_envelope_point(hull, EnvelopePoint([1.0], 2.0))
    assert eval_over(hull, [0.25]) == pytest.approx(0.5)
    assert eval_over(hull, [1.5]) == math.inf


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 6))
def test_compact_envelope_equals_per_cone_form(seed, d, J):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(J, d))
    v = rng.uniform(0, 2, size=J)
    M = float(rng.uniform(0.5, 4))
    pool = EnvelopePool(1, d, M)
    for x, val in zip(X, v):
        add_envelope_point(pool, EnvelopePoint(x, val))
    for _ in range(3):
        x = rng.uniform(-1.5, 1.5, size=d)
        assert eval_over(pool, x) == pytest.approx(per_cone_envelope(X, v, M, x), abs=1e-8)


@given(st.integers(0, 10_000))
def test_envelope_is_M_lipschitz_and_tight_at_anchors(seed):
    rng = np.random.default_rng(seed)
    d = 2
    X = rng.uniform(-1, 1, size=(4, d))
    # values of a convex M-Lipschitz function keep the anchors tight
    g = rng.uniform(-1, 1, size=d)
    v = np.abs(X @ g) + 1.0
    M = 2 * float(np.abs(g).max()) + 1
    pool = EnvelopePool(1, d, M)
    for x, val in zip(X, v):
        add_envelope_point(pool, EnvelopePoint(x, val))
    for x, val in zip(X, v):
        assert eval_over(pool, x) == pytest.approx(val, abs=1e-9)
    a, b = rng.uniform(-1, 1, size=(2, d))
    assert abs(eval_over(pool, a) - eval_over(pool, b)) <= M * np.abs(a - b).sum() + 1e-8


def test_infinite_points_ignored_and_json_round_trip():
    under = {1: CutPool(1, 1, lipschitz=5.0)}
    over = {1: EnvelopePool(1, 1, 5.0)}
    add_cut(under[1], Cut([0.0], 1.0, [-2.0]))
    add_envelope_point(over[1], EnvelopePoint([0.0], math.inf))
    assert len(over[1]) == 0
    add_envelope_point(over[1], EnvelopePoint([0.0], 1.0))
    data = pools_to_json(under, over)
    u2 = {1: CutPool(1, 1, lipschitz=5.0)}
    o2 = {1: EnvelopePool(1, 1, 5.0)}
    load_pools_json(data, u2, o2)
    assert eval_under(u2[1], [0.25]) == eval_under(under[1], [0.25])
    assert eval_over(o2[1], [0.25]) == eval_over(over[1], [0.25])
