"""Single stage subproblem oracles.

The noninitial oracle solves, for every node of stage ``t``, the regularized
stage LP twice: once with the cut pool as cost-to-go (giving a valid cut via
the duals of the copy rows ``w = x_in``) and once with the envelope pool
(giving an over-estimate).  The worst-case distribution then combines the
node results, and the node with the largest approximation gap supplies the
next state.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from .ambiguity import Singleton, worst_case_distribution
from .approx import Cut, CutPool, EnvelopePool, envelope_rows, eval_over, eval_under
from .lp_core import EQ, GE, LinearProgram, solve_lp
from .model import Instance, StageNodeProblem

STATE_TOL = 1e-7
GAP_TOL = 1e-7


class OracleError(Exception):
    pass


class InfeasibleStage(OracleError):
    pass


class UnboundedStage(OracleError):
    pass


class GapControlViolation(OracleError):
    pass


@dataclass
class NodeResult:
    v_under: float
    v_over: float
    gap: float
    x_hat: np.ndarray
    lam: np.ndarray
    y_hat: np.ndarray


@dataclass
class OracleResult:
    cut: Cut
    over_estimate: float
    next_state: np.ndarray
    gap: float
    per_node: list
    worst_case_p: np.ndarray


@dataclass
class InitialResult:
    x: np.ndarray
    y: np.ndarray
    gap: float
    stage_cost: float  # f_1 at the solution
    lower: float  # stage cost plus under-approximation
    upper: float  # stage cost plus over-approximation


class _NodeLP:
    """Column layout of one node LP: [z | w s (regularized) | y | x | theta?]."""

    def __init__(self, node: StageNodeProblem, mode: str):
        dz, ny, dx = node.state_dim_in, node.internal_dim, node.state_dim_out
        self.node = node
        self.mode = mode  # "reg", "copy" (z = x_in rows) or "fixed" (z pinned by bounds)
        self.z = np.arange(dz)
        k = dz
        if mode == "reg":
            self.w = np.arange(k, k + dz)
            self.s = np.arange(k + dz, k + 2 * dz)
            k += 2 * dz
        self.y = np.arange(k, k + ny)
        self.x = np.arange(k + ny, k + ny + dx)
        self.n_base = k + ny + dx

    def assemble(self, x_in, z_box, penalty, theta):
        """Build the LP; ``theta`` is None (terminal), a CutPool or an EnvelopePool."""
        node, dz = self.node, self.node.state_dim_in
        n = self.n_base
        extra_cols, extra_rows = [], []
        if isinstance(theta, CutPool):
            th = n
            n += 1
            m_cut = len(theta)
        elif isinstance(theta, EnvelopePool):
            extra_cols, extra_rows = envelope_rows(theta, self.x, n)
            n += len(extra_cols)
            m_cut = 0
        else:
            m_cut = 0
        head = dz if self.mode in ("reg", "copy") else 0
        if self.mode == "reg":
            head += 2 * dz
        m = head + node.n_rows + m_cut + len(extra_rows)
        A = np.zeros((m, n))
        rhs = np.zeros(m)
        senses = []
        c = np.zeros(n)
        lo = np.full(n, -math.inf)
        hi = np.full(n, math.inf)
        c[self.z] = node.cost_z
        c[self.y] = node.cost_y
        c[self.x] = node.cost_x
        lo[self.y], hi[self.y] = node.y_lo, node.y_hi
        lo[self.x], hi[self.x] = node.x_lo, node.x_hi
        r = 0
        if self.mode == "reg":
            lo[self.z], hi[self.z] = z_box
            A[np.arange(dz), self.w] = 1.0
            rhs[:dz] = x_in
            senses += [EQ] * dz
            i = np.arange(dz)
            # s >= w - z and s >= z - w
            A[dz + i, self.s] = 1.0
            A[dz + i, self.w] = -1.0
            A[dz + i, self.z] = 1.0
            A[2 * dz + i, self.s] = 1.0
            A[2 * dz + i, self.w] = 1.0
            A[2 * dz + i, self.z] = -1.0
            senses += [GE] * (2 * dz)
            c[self.s] = penalty
            lo[self.s] = 0.0
            r = 3 * dz
        elif self.mode == "copy":
            A[np.arange(dz), self.z] = 1.0
            rhs[:dz] = x_in
            senses += [EQ] * dz
            r = dz
        else:
            lo[self.z] = hi[self.z] = x_in
        mr = node.n_rows
        A[r:r + mr, self.z] = node.Az
        A[r:r + mr, self.y] = node.Ay
        A[r:r + mr, self.x] = node.Ax
        rhs[r:r + mr] = node.rhs
        senses += node.senses
        r += mr
        if isinstance(theta, CutPool):
            c[th] = 1.0
            lo[th] = -math.inf if theta.floor is None else theta.floor
            if m_cut:
                # theta - g @ x >= intercept
                A[r:r + m_cut, th] = 1.0
                A[r:r + m_cut][:, self.x] = -theta.gradients
                rhs[r:r + m_cut] = theta.intercepts
                senses += [GE] * m_cut
                r += m_cut
        for k, (cost, l, h) in enumerate(extra_cols):
            j = self.n_base + k
            c[j], lo[j], hi[j] = cost, l, h
        for coefs, sense, b in extra_rows:
            for j, v in coefs.items():
                A[r, j] = v
            rhs[r] = b
            senses.append(sense)
            r += 1
        return LinearProgram(c, A, senses, rhs, lo, hi, constant=node.cost_const)


def _solve_node(node, mode, x_in, z_box, penalty, theta, where):
    layout = _NodeLP(node, mode)
    sol = solve_lp(layout.assemble(x_in, z_box, penalty, theta))
    if sol.status == "Infeasible":
        raise InfeasibleStage(f"{where}: stage LP infeasible at incoming state {x_in}")
    if sol.status == "Unbounded":
        raise UnboundedStage(f"{where}: stage LP unbounded")
    return layout, sol


def _terminal(under, over):
    return under is None and over is None


def initial_oracle(inst: Instance, under: CutPool | None, over: EnvelopePool | None,
                   ) -> InitialResult:
    """Solve the first stage against the cut pool and report the gap at the solution.

    Pass ``None`` for both pools when ``T == 1`` (zero cost-to-go).
    """
    node = inst.stage(1)[0]
    theta = None if _terminal(under, over) else under
    layout, sol = _solve_node(node, "fixed", inst.x0, None, None, theta, "stage 1")
    x = sol.primal[layout.x]
    y = sol.primal[layout.y]
    f1 = node.cost(inst.x0, y, x)
    if theta is None:
        return InitialResult(x, y, 0.0, f1, f1, f1)
    lower_ctg = eval_under(under, x)
    upper_ctg = eval_over(over, x)
    return InitialResult(x, y, upper_ctg - lower_ctg, f1, f1 + lower_ctg, f1 + upper_ctg)


def _clamp_state(inst: Instance, t: int, x_in):
    x_in = np.asarray(x_in, dtype=float).reshape(-1)
    lo, hi = inst.state_box(t)
    if x_in.size != lo.size:
        raise ValueError(f"state for stage {t} must have dimension {lo.size}")
    excess = np.maximum(lo - x_in, x_in - hi)
    if np.any(excess > STATE_TOL):
        raise ValueError(f"state {x_in} lies outside the stage-{t} state space")
    return np.clip(x_in, lo, hi)


def _node_pass(inst, t, k, node, x_in, under, over, penalty, z_box):
    where = f"stage {t} node {k}"
    mode = "copy" if penalty is None else "reg"
    terminal = _terminal(under, over)
    layout, sol = _solve_node(node, mode, x_in, z_box, penalty, None if terminal else under, where)
    v_under = sol.objective_value
    lam = sol.dual[: node.state_dim_in].copy()
    x_hat = sol.primal[layout.x].copy()
    y_hat = sol.primal[layout.y].copy()
    if terminal:
        return NodeResult(v_under, v_under, 0.0, x_hat, lam, y_hat)
    gap = eval_over(over, x_hat) - eval_under(under, x_hat)
    if len(over) == 0:
        v_over = math.inf
    else:
        try:
            _, osol = _solve_node(node, mode, x_in, z_box, penalty, over, where)
            v_over = osol.objective_value
        except InfeasibleStage:
            if not math.isinf(over.lipschitz):
                raise
            v_over = math.inf  # hull-only envelope does not cover reachable states
    return NodeResult(v_under, v_over, gap, x_hat, lam, y_hat)


def _over_value(amb, v_over):
    v_over = np.asarray(v_over)
    if np.all(np.isfinite(v_over)):
        return worst_case_distribution(amb, v_over).value
    if isinstance(amb, Singleton) and np.all(amb.p_hat[~np.isfinite(v_over)] == 0.0):
        return worst_case_distribution(amb, np.where(np.isfinite(v_over), v_over, 0.0)).value
    return math.inf


def noninitial_oracle(inst: Instance, t: int, x_in, under: CutPool | None,
                      over: EnvelopePool | None, threads: int = 1,
                      check_gap: bool = True) -> OracleResult:
    """Oracle for stage ``t >= 2`` at incoming state ``x_in``.

    ``under``/``over`` approximate the stage-``t`` cost-to-go; pass ``None`` for
    both at the last stage.  Unregularized instances use hard copies ``z = x_in``.
    """
    if t < 2 or t > inst.T:
        raise ValueError(f"noninitial oracle needs 2 <= t <= T, got {t}")
    x_in = _clamp_state(inst, t - 1, x_in)
    penalty = inst.reg(t - 1)
    z_box = inst.state_box(t - 1)
    nodes = inst.stage(t)
    args = [(inst, t, k, node, x_in, under, over, penalty, z_box) for k, node in enumerate(nodes)]
    if threads > 1 and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_node = list(pool.map(lambda a: _node_pass(*a), args))
    else:
        per_node = [_node_pass(*a) for a in args]

    amb = inst.ambiguity[t - 2]
    v_under = np.array([r.v_under for r in per_node])
    wc = worst_case_distribution(amb, v_under)
    p = wc.p_star
    grad = np.sum([pk * r.lam for pk, r in zip(p, per_node)], axis=0)
    cut = Cut(x_in, float(p @ v_under), np.asarray(grad).reshape(-1))
    over_estimate = _over_value(amb, [r.v_over for r in per_node])
    gaps = np.array([r.gap for r in per_node])
    star = int(np.argmax(gaps))
    res = OracleResult(cut, over_estimate, per_node[star].x_hat.copy(), float(gaps[star]),
                       per_node, p)
    if check_gap and math.isfinite(res.over_estimate):
        slack = res.over_estimate - cut.value_at_anchor - res.gap
        if slack > GAP_TOL * max(1.0, abs(res.over_estimate)):
            raise GapControlViolation(
                f"stage {t}: over-estimate exceeds cut value plus gap by {slack:.3g}")
    return res


def unregularized_cut(inst: Instance, t: int, x_in, under: CutPool | None,
                      node: int | None = None) -> Cut:
    """Cut from the hard-copy Lagrangian dual, without the norm penalty.

    The gradient is not capped.  With ``node`` given, that node's own cut is
    returned; otherwise node cuts are combined by the worst-case distribution.
    """
    x_in = _clamp_state(inst, t - 1, x_in)
    nodes = inst.stage(t)
    picked = range(len(nodes)) if node is None else [node]
    results = []
    for k in picked:
        layout, sol = _solve_node(nodes[k], "copy", x_in, None, None, under,
                                  f"stage {t} node {k}")
        results.append((sol.objective_value, sol.dual[: nodes[k].state_dim_in].copy()))
    if node is not None:
        v, lam = results[0]
        return Cut(x_in, v, lam)
    v = np.array([r[0] for r in results])
    p = worst_case_distribution(inst.ambiguity[t - 2], v).p_star
    grad = np.sum([pk * r[1] for pk, r in zip(p, results)], axis=0)
    return Cut(x_in, float(p @ v), grad)
