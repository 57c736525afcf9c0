"""Hydro-thermal planning under growing Wasserstein balls.

A larger radius gives the adversary more room, so the optimal worst-case cost
can only rise.  Radius 0 is the plain sample-average problem.
"""
import time

from drmco.ddp import SEQ, SolveConfig, solve
from drmco.instances import HydroParams, gen_hydrothermal

cfg = SolveConfig(mode=SEQ, epsilon=None, rel_gap=1e-3)
T, N = 4, 3

t0 = time.perf_counter()
sol, _, _ = solve(gen_hydrothermal(HydroParams(T=T, N=N), singleton=True), cfg)
print(f"sample average      lb {sol.lower_bound:.6f}  ({time.perf_counter() - t0:.1f}s)")
for beta in (0.0, 0.02, 0.05, 0.1, 0.2):
    t0 = time.perf_counter()
    inst = gen_hydrothermal(HydroParams(T=T, N=N, beta=beta))
    sol, log, _ = solve(inst, cfg)
    print(f"beta = {beta:<5}       lb {sol.lower_bound:.6f}  ub {sol.upper_bound:.6f}  "
          f"{sol.n_eval} evaluations ({time.perf_counter() - t0:.1f}s)")
