"""Why regularize: cut slopes on a deterministic chain grow with the horizon.

Every cost-to-go of the chain is max(0, 1 - 2x), slope 2.  Cuts built from
unregularized stage problems at x = 0 inherit the downstream slope and add
2 per stage.  With a penalty factor M the cut slopes stay below M.
"""
import numpy as np

from drmco.approx import CutPool, add_cut
from drmco.ddp import SEQ, SolveConfig, solve
from drmco.instances import gen_pathological_chain
from drmco.oracle import unregularized_cut

T = 6
chain = gen_pathological_chain(T)
under = {t: CutPool(t, 1, floor=None) for t in range(1, T)}
print("one backward pass at x = 0, no regularization")
for t in range(T, 1, -1):
    cut = unregularized_cut(chain, t, [0.0], under[t] if t < T else None)
    add_cut(under[t - 1], cut)
    print(f"  stage {t}: slope {cut.gradient[0]:+.1f}")

for M in (3.0, 10.0):
    sol, log, pools = solve(gen_pathological_chain(T, reg=M), SolveConfig(mode=SEQ))
    worst = max(np.abs(p.gradients).max() for p in pools.under.values() if len(p))
    print(f"M = {M:>4}: value {sol.lower_bound:.6f} in {sol.n_eval} evaluations, "
          f"steepest cut {worst:.3f}")
