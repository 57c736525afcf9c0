import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drmco.approx import Cut, CutPool, EnvelopePoint, EnvelopePool, add_cut, add_envelope_point
from drmco.ddp import Pools
from drmco.instances import gen_pathological_chain, gen_random_small, t2_tiny
from drmco.model import extensive_cost_to_go
from drmco.oracle import InfeasibleStage, initial_oracle, noninitial_oracle, unregularized_cut


def test_initial_oracle_with_empty_pools():
    inst = t2_tiny()
    pools = Pools.empty(inst)
    res = initial_oracle(inst, pools.under[1], pools.over[1])
    assert res.x[0] == pytest.approx(0.0)
    assert res.gap == math.inf
    assert res.lower == pytest.approx(0.0)


def test_initial_oracle_with_one_cut_and_point():
    inst = t2_tiny()
    pools = Pools.empty(inst)
    add_cut(pools.under[1], Cut([0.0], 1.0, [-2.0]))
    add_envelope_point(pools.over[1], EnvelopePoint([0.0], 1.0))
    res = initial_oracle(inst, pools.under[1], pools.over[1])
    assert res.x[0] == pytest.approx(0.5)
    assert res.gap == pytest.approx(3.5)
    assert res.lower == pytest.approx(0.5)
    assert res.upper == pytest.approx(4.0)


def test_noninitial_oracle_at_zero():
    inst = t2_tiny()
    res = noninitial_oracle(inst, 2, [0.0], None, None)
    assert [r.v_under for r in res.per_node] == pytest.approx([1.0, 0.0])
    assert res.per_node[0].lam[0] == pytest.approx(-2.0)
    assert res.cut.value_at_anchor == pytest.approx(1.0)
    assert res.cut.gradient[0] == pytest.approx(-2.0)
    assert res.over_estimate == pytest.approx(1.0)
    assert res.gap == 0.0


def test_terminal_stage_singleton():
    inst = t2_tiny("singleton")
    res = noninitial_oracle(inst, 2, [0.5], None, None)
    assert res.cut.value_at_anchor == pytest.approx(0.25)


def test_state_outside_space_rejected():
    with pytest.raises(ValueError):
        noninitial_oracle(t2_tiny(), 2, [2.0], None, None)


def test_unregularized_cut_steepens_along_chain():
    T = 4
    inst = gen_pathological_chain(T)
    under = {t: CutPool(t, 1, floor=None) for t in range(1, T)}
    slopes = {}
    for t in range(T, 1, -1):
        c = unregularized_cut(inst, t, [0.0], under[t] if t < T else None)
        add_cut(under[t - 1], c)
        slopes[t] = c.gradient[0]
    assert slopes == {t: pytest.approx(-2.0 * (T - t + 1)) for t in range(2, T + 1)}


def test_hard_copy_infeasibility_raises():
    from drmco.instances import InventoryParams, gen_inventory
    inst = gen_inventory(InventoryParams(K=1, E=1, T=2), with_recourse=False)
    # fully backlogged and nothing on order: any positive demand breaks the band
    with pytest.raises(InfeasibleStage):
        noninitial_oracle(inst.with_reg(None), 2, [-3.5, 0.0], None, None)
    res = noninitial_oracle(inst, 2, [-3.5, 0.0], None, None)
    assert np.isfinite(res.cut.value_at_anchor)


@given(st.integers(0, 200), st.integers(0, 10_000))
def test_cut_and_over_estimate_are_valid(inst_seed, state_seed):
    """Cuts stay below and over-estimates above the regularized cost-to-go."""
    inst = gen_random_small(inst_seed % 20)
    rng = np.random.default_rng(state_seed)
    t = int(rng.integers(2, inst.T + 1))
    lo, hi = inst.state_box(t - 1)
    x = rng.uniform(lo, hi)
    if t < inst.T:
        pools = Pools.empty(inst)
        # seed the downstream pools with true values at a few states
        for _ in range(3):
            y = rng.uniform(*inst.state_box(t))
            v = extensive_cost_to_go(inst, t, y)
            add_envelope_point(pools.over[t], EnvelopePoint(y, v))
        under, over = pools.under[t], pools.over[t]
    else:
        under = over = None
    res = noninitial_oracle(inst, t, x, under, over)
    assert np.abs(res.cut.gradient).max(initial=0) <= inst.reg(t - 1) + 1e-9
    for _ in range(5):
        y = rng.uniform(lo, hi)
        assert res.cut(y) <= extensive_cost_to_go(inst, t - 1, y) + 1e-7
    truth = extensive_cost_to_go(inst, t - 1, x)
    assert res.cut.value_at_anchor <= truth + 1e-7
    assert res.over_estimate >= truth - 1e-7
    # gap control
    assert res.over_estimate - res.cut.value_at_anchor <= res.gap + 1e-7


def test_threads_give_identical_results():
    inst = gen_random_small(4)
    a = noninitial_oracle(inst, 3, inst.state_box(2)[0], None, None, threads=1)
    b = noninitial_oracle(inst, 3, inst.state_box(2)[0], None, None, threads=3)
    assert a.cut.value_at_anchor == b.cut.value_at_anchor
    np.testing.assert_array_equal(a.cut.gradient, b.cut.gradient)
