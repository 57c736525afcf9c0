"""Inventory without relatively complete recourse.

Closing the express channel and narrowing the inventory band means some
states reached in the forward pass have no feasible order for large demands.
With hard state copies the stage problem is infeasible; the regularized
stage problem pays M per unit of state correction instead and keeps going.
"""
from drmco.ddp import NDDP, SolveConfig, SolveFailed, solve
from drmco.instances import InventoryParams, gen_inventory

inst = gen_inventory(InventoryParams(K=2, E=2, T=5), with_recourse=False)
cfg = SolveConfig(mode=NDDP, epsilon=None, rel_gap=0.01)

try:
    solve(inst.with_reg(None), cfg)
except SolveFailed as exc:
    print(f"hard copies: {exc.cause} after {len(exc.log.records)} records")

sol, log, _ = solve(inst, cfg)
print(f"regularized (M = 100): {sol.status}, lb {sol.lower_bound:.4f}, "
      f"ub {sol.upper_bound:.4f}, {sol.n_eval} evaluations")
print("first-stage state (inventory levels, then regular orders):", sol.x1)
