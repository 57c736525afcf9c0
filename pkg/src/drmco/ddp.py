"""Sequential and nonsequential dual dynamic programming drivers.

Both drivers keep, for every non-terminal stage ``t``, a cut pool (lower
approximation) and an envelope pool (upper approximation) of the stage-``t``
cost-to-go function.  The first-stage problem solved against these pools
gives a deterministic lower bound and an upper bound; the run stops when the
two are within the requested gap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np

from .approx import CutPool, EnvelopePoint, EnvelopePool, add_cut, add_envelope_point, eval_under
from .model import Instance, check
from .oracle import InfeasibleStage, initial_oracle, noninitial_oracle

log = logging.getLogger(__name__)

SEQ, NDDP = "seq", "nddp"
CONVERGED, ITER_LIMIT, TIME_LIMIT, INFEASIBLE = "Converged", "IterLimit", "TimeLimit", "Infeasible"


class ScheduleError(ValueError):
    pass


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class Static:
    """Fixed approximation gaps ``delta_1 > ... > delta_T = 0``."""

    deltas: tuple

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))


@dataclass(frozen=True)
class DynamicRelative:
    """Gaps ``delta_t = LowerBound * alpha * (T - t) / (T - 1)``, refreshed every step."""

    alpha: float


def linear_schedule(eps: float, T: int) -> Static:
    """``delta_t = eps * (T - t) / (T - 1)``."""
    if T == 1:
        return Static((eps,))
    return Static(tuple(eps * (T - t) / (T - 1) for t in range(1, T + 1)))


@dataclass
class SolveConfig:
    mode: str = SEQ
    epsilon: float | None = 1e-6
    rel_gap: float | None = None
    gap_schedule: Static | DynamicRelative | None = None
    max_iterations: int = 100_000
    max_wall_time: float = math.inf
    rng_seed: int = 0
    threads: int = 1
    adaptive_m: bool = False
    check_gap: bool = True

    def converged(self, lb: float, ub: float) -> bool:
        if not math.isfinite(ub):
            return False
        if self.rel_gap is not None:
            return ub - lb <= self.rel_gap * abs(lb)
        return ub - lb <= self.epsilon


@dataclass
class IterationRecord:
    iteration: int
    stage_path: list
    lower: float
    upper: float
    gaps: dict
    n_eval: int
    wall: float

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass
class SolveLog:
    records: list = field(default_factory=list)
    status: str | None = None

    @property
    def n_eval(self) -> int:
        return self.records[-1].n_eval if self.records else 0


@dataclass
class Solution:
    x1: np.ndarray
    y1: np.ndarray
    lower_bound: float
    upper_bound: float
    n_eval: int
    status: str

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound


class SolveFailed(Exception):
    """Wraps an oracle failure together with the partial log."""

    def __init__(self, cause, log):
        super().__init__(str(cause))
        self.cause = cause
        self.log = log


@dataclass
class Pools:
    under: dict
    over: dict

    @classmethod
    def empty(cls, inst: Instance):
        under, over = {}, {}
        for t in range(1, inst.T):
            m = inst.reg(t)
            d = inst.dim(t)
            under[t] = CutPool(t, d, lipschitz=m)
            over[t] = EnvelopePool(t, d, math.inf if m is None else m)
        return cls(under, over)

    def stage(self, inst: Instance, t: int):
        if t >= inst.T:
            return None, None
        return self.under[t], self.over[t]


class _Run:
    """Mutable state shared by both drivers."""

    def __init__(self, inst, cfg, pools, on_record):
        self.inst = inst
        self.cfg = cfg
        self.pools = pools or Pools.empty(inst)
        self.log = SolveLog()
        self.n_eval = 0
        self.lb = -math.inf
        self.ub = math.inf
        self.best = None
        self.last = None
        self.start = time.perf_counter()
        self.on_record = on_record
        self.path = []
        self.gaps = {}
        self.iteration = 0

    def initial_step(self):
        under, over = self.pools.stage(self.inst, 1)
        res = initial_oracle(self.inst, under, over)
        self.n_eval += 1
        self.path.append(1)
        self.gaps[1] = res.gap
        self.last = res
        self.lb = res.lower
        if res.upper < self.ub or self.best is None:
            if res.upper < self.ub:
                self.ub = res.upper
            self.best = res if math.isfinite(res.upper) or self.best is None else self.best
        self.record()
        return res

    def noninitial_step(self, t, x_prev):
        under, over = self.pools.stage(self.inst, t)
        res = noninitial_oracle(self.inst, t, x_prev, under, over, threads=self.cfg.threads,
                                check_gap=self.cfg.check_gap)
        self.n_eval += 1
        self.path.append(t)
        self.gaps[t] = res.gap
        return res

    def update(self, t, x_anchor, res):
        """Install the oracle output of stage ``t`` into the stage ``t-1`` pools."""
        add_cut(self.pools.under[t - 1], res.cut)
        add_envelope_point(self.pools.over[t - 1], EnvelopePoint(x_anchor, res.over_estimate))

    def record(self):
        rec = IterationRecord(self.iteration, self.path, self.lb, self.ub, dict(self.gaps),
                              self.n_eval, time.perf_counter() - self.start)
        self.log.records.append(rec)
        log.debug("iter %d lb=%.10g ub=%.10g n_eval=%d", rec.iteration, rec.lower, rec.upper,
                  rec.n_eval)
        if self.on_record is not None:
            self.on_record(rec)
        self.path = []
        self.gaps = {}
        self.iteration += 1

    def out_of_budget(self):
        if self.iteration > self.cfg.max_iterations:
            return ITER_LIMIT
        if time.perf_counter() - self.start > self.cfg.max_wall_time:
            return TIME_LIMIT
        return None

    def solution(self, status):
        self.log.status = status
        best = self.best or self.last
        return Solution(best.x.copy(), best.y.copy(), self.lb, self.ub, self.n_eval, status)


def _run_seq(run: _Run, stop):
    inst = run.inst
    run.initial_step()
    while not stop(run.lb, run.ub):
        limit = run.out_of_budget()
        if limit:
            return limit
        trail = []
        x_prev = run.last.x
        for t in range(2, inst.T + 1):  # forward step
            res = run.noninitial_step(t, x_prev)
            trail.append((t, x_prev, res))
            x_prev = res.next_state
        for t, x_anchor, res in reversed(trail):  # backward step
            run.update(t, x_anchor, res)
        run.initial_step()
    return CONVERGED


def _deltas(run: _Run):
    sched = run.cfg.gap_schedule
    T = run.inst.T
    if isinstance(sched, Static):
        return sched.deltas
    lb = max(run.lb, 0.0)
    return tuple(lb * sched.alpha * (T - t) / (T - 1) for t in range(1, T + 1))


def _run_nddp(run: _Run, stop):
    inst = run.inst
    T = inst.T
    states = [None] * (T + 1)
    t = 1
    while True:
        if t == 1:
            res = run.initial_step()
            if stop(run.lb, run.ub):
                return CONVERGED
            limit = run.out_of_budget()
            if limit:
                return limit
            states[1] = res.x
            t = 2
            continue
        res = run.noninitial_step(t, states[t - 1])
        delta = _deltas(run)
        if t < T and res.gap > delta[t - 1]:
            states[t] = res.next_state
            t += 1
        else:
            run.update(t, states[t - 1], res)
            t -= 1


def check_schedule(cfg: SolveConfig, T: int) -> None:
    sched = cfg.gap_schedule
    if isinstance(sched, Static):
        d = sched.deltas
        if len(d) != T:
            raise ScheduleError(f"static schedule needs {T} gaps, got {len(d)}")
        if d[-1] != 0.0:
            raise ScheduleError("the last approximation gap must be 0")
        if any(not d[i] > d[i + 1] for i in range(T - 1)):
            raise ScheduleError("approximation gaps must be strictly decreasing")
        if cfg.rel_gap is None and cfg.epsilon is not None and T > 1 \
                and not math.isclose(d[0], cfg.epsilon, rel_tol=1e-12, abs_tol=0.0):
            raise ScheduleError("the first approximation gap must equal epsilon")
    elif isinstance(sched, DynamicRelative):
        if not sched.alpha > 0:
            raise ScheduleError("relative gap must be positive")
    elif sched is not None:
        raise ScheduleError(f"unknown schedule {sched!r}")


def _prepare(inst, cfg, mode):
    check(inst)
    if cfg.rel_gap is None and not (cfg.epsilon is not None and cfg.epsilon > 0):
        raise InvalidParams("a positive epsilon or a relative gap is required")
    if mode == NDDP:
        if cfg.gap_schedule is None:
            cfg.gap_schedule = (DynamicRelative(cfg.rel_gap) if cfg.rel_gap is not None
                                else linear_schedule(cfg.epsilon, inst.T))
        check_schedule(cfg, inst.T)


def _solve(inst, cfg, mode, pools=None, on_record=None):
    _prepare(inst, cfg, mode)
    driver = _run_seq if mode == SEQ else _run_nddp
    if cfg.adaptive_m:
        return _solve_adaptive(inst, cfg, driver, pools, on_record)
    run = _Run(inst, cfg, pools, on_record)
    try:
        status = driver(run, cfg.converged)
    except InfeasibleStage as exc:
        run.log.status = INFEASIBLE
        raise SolveFailed(exc, run.log) from exc
    return run.solution(status), run.log, run.pools


def solve_seq_ddp(inst: Instance, cfg: SolveConfig, pools: Pools | None = None, on_record=None):
    """Sequential DDP: full forward sweep, full backward sweep, first-stage check.

    Returns ``(Solution, SolveLog)``.  Oracle failures raise :class:`SolveFailed`
    whose ``cause`` is the original exception (e.g. ``InfeasibleStage``).
    """
    sol, log_, _ = _solve(inst, cfg, SEQ, pools, on_record)
    return sol, log_


def solve_nddp(inst: Instance, cfg: SolveConfig, pools: Pools | None = None, on_record=None):
    """Nonsequential DDP: move forward while the stage gap exceeds its threshold."""
    sol, log_, _ = _solve(inst, cfg, NDDP, pools, on_record)
    return sol, log_


def solve(inst: Instance, cfg: SolveConfig, pools: Pools | None = None, on_record=None):
    """Dispatch on ``cfg.mode``; returns ``(Solution, SolveLog, Pools)``."""
    if cfg.mode not in (SEQ, NDDP):
        raise InvalidParams(f"unknown mode {cfg.mode!r}")
    return _solve(inst, cfg, cfg.mode, pools, on_record)


# --- adaptive regularization ---------------------------------------------------------

def _active_cuts_capped(pools: Pools, states: dict, M: float) -> bool:
    """True if some cut active at a recently visited state has slope at the cap."""
    for t, x in states.items():
        pool = pools.under.get(t)
        if pool is None or not len(pool) or x is None:
            continue
        vals = pool.intercepts + pool.gradients @ x
        k = int(np.argmax(vals))
        if vals[k] < eval_under(pool, x) - 1e-12:
            continue  # floor is active
        if np.max(np.abs(pool.gradients[k]), initial=0.0) >= M * (1.0 - 1e-6):
            return True
    return False


def _solve_adaptive(inst, cfg, driver, pools, on_record, factor=math.sqrt(10.0),
                    max_restarts=20):
    """Grow a uniform M by ``factor`` while active cuts sit at the slope cap.

    Cuts stay valid when M grows (the regularized value is nondecreasing in M);
    envelopes do not, so they are reset on every increase.
    """
    if inst.reg_factors is None:
        raise InvalidParams("adaptive regularization needs a regularized instance")
    M = float(np.max(inst.reg_factors))
    inst = inst.with_reg(M)
    total_log = SolveLog()
    n_eval = 0
    for _ in range(max_restarts + 1):
        run = _Run(inst, cfg, pools, on_record)
        run.n_eval = n_eval
        try:
            status = driver(run, cfg.converged)
        except InfeasibleStage as exc:
            total_log.records += run.log.records
            total_log.status = INFEASIBLE
            raise SolveFailed(exc, total_log) from exc
        total_log.records += run.log.records
        n_eval = run.n_eval
        states = _recent_states(run)
        if status != CONVERGED or not _active_cuts_capped(run.pools, states, M):
            sol = run.solution(status)
            total_log.status = status
            return sol, total_log, run.pools
        M *= factor
        log.info("active cuts at the slope cap; raising M to %.6g", M)
        inst = inst.with_reg(M)
        fresh = Pools.empty(inst)
        for t, pool in run.pools.under.items():
            for c in pool.cuts:
                add_cut(fresh.under[t], c)
        pools = fresh
    sol = run.solution(status)
    total_log.status = status
    return sol, total_log, run.pools


def _recent_states(run: _Run) -> dict:
    """Forward states seen at the end of the run, by simulating one forward sweep."""
    inst = run.inst
    states = {1: run.last.x}
    x = run.last.x
    for t in range(2, inst.T):
        under, over = run.pools.stage(inst, t)
        res = noninitial_oracle(inst, t, x, under, over, check_gap=False)
        x = res.next_state
        states[t] = x
    return states


# --- complexity bounds -------------------------------------------------------------------

@dataclass
class BoundParams:
    T: int
    dims: list  # d_t for t = 1..T-1
    diameters: list  # D_t
    lipschitz: list  # M_t
    epsilon: float | None = None
    deltas: list | None = None  # delta_1..delta_T
    alpha: float | None = None
    cost_floor: float | None = None  # C

    @classmethod
    def from_instance(cls, inst: Instance, **kw):
        if inst.reg_factors is None:
            raise InvalidParams("bounds need finite regularization factors")
        T = inst.T
        return cls(T, [inst.dim(t) for t in range(1, T)],
                   [float(inst.diameters[t - 1]) for t in range(1, T)],
                   [inst.reg(t) for t in range(1, T)], **kw)


def eval_upper_bound(params: BoundParams, mode: str) -> float:
    """Closed-form cap on the number of oracle evaluations before termination.

    With a gap vector ``delta`` (given, or ``eps (T-t)/(T-1)`` from ``epsilon``)
    the per-stage term is ``(1 + 2 M_t D_t / (delta_t - delta_{t+1}))^{d_t}``;
    Seq-DDP multiplies the sum by ``T``, NDDP by 2.  Supplying ``alpha`` and
    ``cost_floor`` uses ``delta_t = (T - t) alpha C`` instead.
    """
    T = params.T
    if T < 2:
        return 1.0
    if params.deltas is not None:
        deltas = list(map(float, params.deltas))
    elif params.alpha is not None and params.cost_floor is not None:
        deltas = [(T - t) * params.alpha * params.cost_floor for t in range(1, T + 1)]
    elif params.epsilon is not None:
        deltas = list(linear_schedule(params.epsilon, T).deltas)
    else:
        raise InvalidParams("need deltas, epsilon, or alpha with a cost floor")
    if len(deltas) != T:
        raise InvalidParams(f"expected {T} gaps")
    for name, seq in (("dims", params.dims), ("diameters", params.diameters),
                      ("lipschitz", params.lipschitz)):
        if len(seq) != T - 1:
            raise InvalidParams(f"{name} must list T-1 = {T - 1} values")
    total = 0.0
    for t in range(1, T):
        step = deltas[t - 1] - deltas[t]
        if not step > 0:
            raise InvalidParams("approximation gaps must be strictly decreasing")
        M, D, d = params.lipschitz[t - 1], params.diameters[t - 1], params.dims[t - 1]
        if not (M > 0 and D >= 0):
            raise InvalidParams("need positive M and nonnegative D")
        total += (1.0 + 2.0 * M * D / step) ** d
    if mode == SEQ:
        return 1.0 + T * total
    if mode == NDDP:
        return 1.0 + 2.0 * total
    raise InvalidParams(f"unknown mode {mode!r}")
