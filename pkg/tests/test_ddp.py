import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drmco.ddp import (CONVERGED, ITER_LIMIT, NDDP, SEQ, BoundParams, DynamicRelative,
                       InvalidParams, ScheduleError, SolveConfig, SolveFailed, Static,
                       eval_upper_bound, linear_schedule, solve, solve_nddp, solve_seq_ddp)
from drmco.instances import (InventoryParams, gen_inventory, gen_pathological_chain,
                             gen_random_small, t1_trivial, t2_tiny)
from drmco.model import solve_extensive
from drmco.oracle import InfeasibleStage


@pytest.mark.parametrize("mode", [SEQ, NDDP])
def test_t2_tiny_simplex(mode):
    sol, log = (solve_seq_ddp if mode == SEQ else solve_nddp)(t2_tiny(), SolveConfig(mode=mode))
    assert sol.status == CONVERGED
    assert sol.lower_bound == pytest.approx(2 / 3, abs=1e-6)
    assert sol.upper_bound == pytest.approx(2 / 3, abs=1e-6)
    assert sol.x1[0] == pytest.approx(1 / 3, abs=1e-6)


def test_t2_tiny_singleton():
    sol, _ = solve_seq_ddp(t2_tiny("singleton"), SolveConfig())
    assert sol.lower_bound == pytest.approx(0.5, abs=1e-6)
    assert sol.x1[0] == pytest.approx(0.0, abs=1e-6)


def test_single_stage():
    sol, log = solve_seq_ddp(t1_trivial(), SolveConfig())
    assert sol.n_eval == 1
    assert sol.gap == 0.0
    assert sol.status == CONVERGED


def test_nddp_static_schedule_matches():
    cfg = SolveConfig(mode=NDDP, gap_schedule=Static((1e-6, 0.0)))
    sol, _ = solve_nddp(t2_tiny(), cfg)
    assert sol.lower_bound == pytest.approx(2 / 3, abs=1e-6)


def test_schedule_errors():
    inst = gen_random_small(0)
    for bad in [(1e-6, 1e-6, 0.0), (1e-6, 5e-7, 1e-9), (1e-6, 0.0)]:
        with pytest.raises(ScheduleError):
            solve_nddp(inst, SolveConfig(mode=NDDP, gap_schedule=Static(bad)))


def test_bound_examples():
    p = BoundParams(2, [1], [1.0], [1.0], epsilon=1.0)
    assert eval_upper_bound(p, SEQ) == 7
    assert eval_upper_bound(p, NDDP) == 7
    cor = BoundParams(3, [1, 1], [1.0, 1.0], [1.0, 1.0], alpha=1.0, cost_floor=1.0)
    assert eval_upper_bound(cor, SEQ) == 19
    assert eval_upper_bound(cor, NDDP) == 1 + 2 * 2 * 3
    with pytest.raises(InvalidParams):
        eval_upper_bound(BoundParams(2, [1], [1.0], [1.0], deltas=[0.0, 0.0]), SEQ)


def test_linear_schedule():
    assert linear_schedule(1.0, 3).deltas == (1.0, 0.5, 0.0)


def _check_log(log):
    lbs = [r.lower for r in log.records]
    ubs = [r.upper for r in log.records]
    evals = [r.n_eval for r in log.records]
    assert all(b >= a - 1e-9 for a, b in zip(lbs, lbs[1:]))
    finite = [u for u in ubs if math.isfinite(u)]
    assert all(b <= a + 1e-9 for a, b in zip(finite, finite[1:]))
    assert all(b > a for a, b in zip(evals, evals[1:]))


@settings(max_examples=15)
@given(st.integers(0, 500), st.sampled_from([SEQ, NDDP]))
def test_bounds_bracket_optimum(seed, mode):
    inst = gen_random_small(seed)
    opt = solve_extensive(inst)[0]
    sol, log, _ = solve(inst, SolveConfig(mode=mode))
    assert sol.status == CONVERGED
    assert sol.gap <= 1e-6
    assert sol.lower_bound <= opt + 1e-6 and sol.upper_bound >= opt - 1e-6
    for r in log.records:
        assert r.lower <= opt + 1e-6 and r.upper >= opt - 1e-6
    _check_log(log)


def test_determinism():
    inst = gen_random_small(7)
    a = solve(inst, SolveConfig(mode=NDDP))[1]
    b = solve(inst, SolveConfig(mode=NDDP))[1]
    strip = lambda log: [(r.iteration, r.stage_path, r.lower, r.upper, r.n_eval) for r in log.records]
    assert strip(a) == strip(b)


def test_iteration_limit_status():
    inst = gen_random_small(16)
    sol, log, _ = solve(inst, SolveConfig(max_iterations=1))
    assert sol.status == ITER_LIMIT
    assert log.status == ITER_LIMIT


def test_relative_gap_termination():
    inst = gen_random_small(2)
    sol, _, _ = solve(inst, SolveConfig(mode=NDDP, rel_gap=0.05, epsilon=None))
    assert sol.gap <= 0.05 * abs(sol.lower_bound)


def test_infeasible_stage_carries_log():
    inst = gen_inventory(InventoryParams(K=1, E=1, T=3), with_recourse=False).with_reg(None)
    with pytest.raises(SolveFailed) as exc:
        solve(inst, SolveConfig(mode=NDDP, rel_gap=0.01, epsilon=None))
    assert isinstance(exc.value.cause, InfeasibleStage)
    assert exc.value.log.status == "Infeasible"


def test_complexity_bound_holds_with_static_schedule():
    for seed in range(5):
        inst = gen_random_small(seed)
        for mode in (SEQ, NDDP):
            cfg = SolveConfig(mode=mode, gap_schedule=linear_schedule(1e-6, inst.T))
            sol, _, _ = solve(inst, cfg)
            bound = eval_upper_bound(BoundParams.from_instance(inst, epsilon=1e-6), mode)
            assert sol.n_eval <= bound


@pytest.mark.parametrize("seed", [1, 4, 9])
def test_adaptive_regularization_recovers_true_value(seed):
    # M = 0.2 is below the cost-to-go slopes of these instances
    inst = gen_random_small(seed, reg=0.2)
    opt = solve_extensive(inst.with_reg(None))[0]
    plain, _, _ = solve(inst, SolveConfig())
    adaptive, _, _ = solve(inst, SolveConfig(adaptive_m=True))
    assert plain.lower_bound < opt - 1e-3
    assert adaptive.lower_bound == pytest.approx(opt, abs=1e-6)


def test_dynamic_schedule_requires_positive_alpha():
    with pytest.raises(ScheduleError):
        solve(gen_random_small(0), SolveConfig(mode=NDDP, gap_schedule=DynamicRelative(0.0)))
