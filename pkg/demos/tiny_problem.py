"""A two-stage problem small enough to solve by hand.

Stage 1 buys x in [0, 1] at unit cost.  Stage 2 is one of two nodes, paying
max(0, 1 - 2x) or x.  If the adversary may pick any distribution over the two
nodes the optimum is 2/3 at x = 1/3; with equal weights it is 1/2 at x = 0.
"""
from drmco.ddp import NDDP, SEQ, BoundParams, SolveConfig, eval_upper_bound, solve
from drmco.instances import t2_tiny
from drmco.model import solve_extensive

for amb in ("simplex", "singleton"):
    inst = t2_tiny(amb)
    exact = solve_extensive(inst)[0]
    print(f"{amb}: extensive optimum {exact:.6f}")
    for mode in (SEQ, NDDP):
        sol, log, _ = solve(inst, SolveConfig(mode=mode))
        print(f"  {mode:>4}: x1 = {sol.x1[0]:.6f}, bounds [{sol.lower_bound:.6f}, "
              f"{sol.upper_bound:.6f}], {sol.n_eval} evaluations")
        for r in log.records:
            print(f"        iter {r.iteration}: lb {r.lower:.4f} ub {r.upper:.4f} "
                  f"path {r.stage_path}")

inst = t2_tiny()
params = BoundParams.from_instance(inst, epsilon=1e-6)
print("evaluation-count bounds at eps = 1e-6:",
      {m: eval_upper_bound(params, m) for m in (SEQ, NDDP)})
