"""Seeded instance generators.

* ``gen_inventory``: multi-commodity inventory with box demand uncertainty.
* ``gen_hydrothermal``: hydro-thermal planning with Wasserstein ambiguity.
* ``gen_pathological_chain``: deterministic chain whose unregularized cuts steepen.
* ``gen_worstcase``: hard instances built from spherical cap packings.
* ``t2_tiny`` and ``gen_random_small``: small fixtures for oracle checks.

All generators are pure functions of their parameters (including the seed).
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

from .ambiguity import FullSimplex, Singleton, WassersteinBall
from .model import EQ, GE, LE, Instance, StageNodeProblem, check, vertices_to_dr

INF = math.inf


class InvalidDepth(ValueError):
    pass


def _diag(lo, hi):
    return float(np.linalg.norm(np.asarray(hi, float) - np.asarray(lo, float)))


# --- inventory -------------------------------------------------------------------------

@dataclass
class InventoryParams:
    K: int = 5
    E: int = 4
    T: int = 10
    Ba: float = 10.0
    Bb: float = 10.0
    Bl: float = 10.0
    Bc: float | None = None  # defaults to 0.3 K
    cF: float = 1.0
    cb: float = 1.0
    ca_range: tuple = (1.0, 3.0)
    cH_range: tuple = (0.0, 2.0)
    cB_range: tuple = (0.0, 2.0)
    Bl_no_recourse: float = 3.5
    reg: float = 100.0
    seed: int = 0

    def check(self):
        if self.K < 1 or self.T < 2 or not 1 <= self.E <= 20:
            raise ValueError("need K >= 1, 1 <= E <= 20 and T >= 2")
        if min(self.Ba, self.Bb, self.Bl, self.Bl_no_recourse, self.cF) <= 0:
            raise ValueError("bounds and the fixed cost must be positive")


def inventory_demand(t: int, k: int, K: int, phi_row, xi) -> float:
    """Demand of product ``k`` (0-based) in stage ``t`` under factor vector ``xi``."""
    # products 1..floor(K/2) (1-based) follow the sine profile
    if k + 1 <= K / 2:
        base = math.sin((t - 1) * math.pi / 5)
    else:
        base = math.cos((t - 1) * math.pi / 5)
    return 2.0 + base + float(np.dot(phi_row, xi))


def _inventory_node(K, demand, ca, cH, cB, cb, cF, Ba, Bb, Bl, Bc):
    # z = (l_prev, b_prev); y = (a, l+, l-); x = (l, b)
    rows = [(None, {k: 1.0 for k in range(K)}, None, LE, Bc)]
    for k in range(K):
        # l - a - b_prev - l_prev = -demand
        rows.append(({k: -1.0, K + k: -1.0}, {k: -1.0}, {k: 1.0}, EQ, -demand[k]))
        # l = l+ - l-
        rows.append((None, {K + k: -1.0, 2 * K + k: 1.0}, {k: 1.0}, EQ, 0.0))
    cost_y = np.concatenate([ca, cH, cB])
    cost_x = np.concatenate([np.zeros(K), np.full(K, cb)])
    yb = [(0.0, Ba)] * K + [(0.0, Bl)] * (2 * K)
    xb = [(-Bl, Bl)] * K + [(0.0, Bb)] * K
    return StageNodeProblem.build(2 * K, 3 * K, 2 * K, rows, cost_y=cost_y, cost_x=cost_x,
                                  cost_const=K * cF, y_bounds=yb, x_bounds=xb)


def gen_inventory(p: InventoryParams | None = None, with_recourse: bool = True) -> Instance:
    """Inventory instance with state ``(l_1..l_K, b_1..b_K)``.

    Every stage after the first has one node per vertex of ``[-1, 1]^E``.
    Without recourse the express channel is closed and the inventory band
    shrinks, so large demands can strand states with no feasible order.
    """
    p = p or InventoryParams()
    p.check()
    K, E, T = p.K, p.E, p.T
    rng = np.random.default_rng(p.seed)
    ca = rng.uniform(*p.ca_range, size=K)
    cH = rng.uniform(*p.cH_range, size=K)
    cB = rng.uniform(*p.cB_range, size=K)
    phi = rng.uniform(-1.0 / E, 1.0 / E, size=(T + 1, K, E))
    Bc = 0.3 * K if p.Bc is None else p.Bc
    Ba = p.Ba if with_recourse else 0.0
    Bl = p.Bl if with_recourse else p.Bl_no_recourse
    common = dict(ca=ca, cH=cH, cB=cB, cb=p.cb, cF=p.cF, Ba=Ba, Bb=p.Bb, Bl=Bl, Bc=Bc)

    def demand(t, xi):
        return np.array([inventory_demand(t, k, K, phi[t, k], xi) for k in range(K)])

    nodes = [[_inventory_node(K, demand(1, np.zeros(E)), **common)]]
    sets = []
    for t in range(2, T + 1):
        stage, amb = vertices_to_dr(-np.ones(E), np.ones(E),
                                    lambda xi, t=t: _inventory_node(K, demand(t, xi), **common))
        nodes.append(stage)
        sets.append(amb)
    lo = np.concatenate([np.full(K, -Bl), np.zeros(K)])
    hi = np.concatenate([np.full(K, Bl), np.full(K, p.Bb)])
    diam = np.full(T, _diag(lo, hi))
    meta = {"family": "inventory", "params": vars(p).copy(), "with_recourse": with_recourse,
            "phi": phi}
    return check(Instance(T, nodes, sets, np.full(T - 1, p.reg), np.zeros(2 * K), diam, meta))


# --- hydro-thermal ---------------------------------------------------------------------

@dataclass
class HydroParams:
    K: int = 4
    plants_per_region: int = 3
    T: int = 6
    N: int = 3
    demand: float = 1.0
    inflow_log_mean: float = 0.0
    inflow_log_std: float = 0.5
    inflow_share: float = 0.5  # mean inflow as a fraction of demand
    storage_cap: float = 2.0
    hydro_cap: float = 1.0
    thermal_cap: float = 0.25
    thermal_cost: tuple = (1.0, 5.0)
    exchange_cap: float = 0.5
    exchange_cost: float = 0.1
    deficit_cost: tuple = (8.0, 12.0)
    spill_cost: float = 0.001
    x0_share: float = 0.5
    beta: float = 0.0
    reg: float = 20.0
    seed: int = 0

    def check(self):
        if self.N < 1 or self.K < 1 or self.T < 1:
            raise ValueError("need N, K, T >= 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


def _hydro_node(p, inflow, cg, ce, ca):
    K, L = p.K, p.plants_per_region
    pairs = [(k, j) for k in range(K) for j in range(K) if k != j]
    # y = h (K) | s (K) | g (K*L) | e (pairs) | a (pairs)
    ih, is_, ig = 0, K, 2 * K
    ie = ig + K * L
    ia = ie + len(pairs)
    ny = ia + len(pairs)
    rows = []
    for k in range(K):
        # l + h + s - l_prev = inflow
        rows.append(({k: -1.0}, {ih + k: 1.0, is_ + k: 1.0}, {k: 1.0}, EQ, inflow[k]))
    for k in range(K):
        y = {ih + k: 1.0}
        for j in range(L):
            y[ig + k * L + j] = 1.0
        for q, (a, b) in enumerate(pairs):
            if a == k:
                y[ia + q] = y.get(ia + q, 0.0) + 1.0  # deficit account of k
                y[ie + q] = y.get(ie + q, 0.0) - 1.0  # export from k
            if b == k:
                y[ie + q] = y.get(ie + q, 0.0) + 1.0  # import into k
        rows.append((None, y, None, EQ, p.demand))
    cost_y = np.concatenate([np.zeros(K), np.full(K, p.spill_cost), cg, ce, ca])
    yb = ([(0.0, p.hydro_cap)] * K + [(0.0, INF)] * K + [(0.0, p.thermal_cap)] * (K * L)
          + [(0.0, p.exchange_cap)] * len(pairs) + [(0.0, p.demand)] * len(pairs))
    assert len(yb) == ny
    return StageNodeProblem.build(K, ny, K, rows, cost_y=cost_y, y_bounds=yb,
                                  x_bounds=[(0.0, p.storage_cap)] * K)


def gen_hydrothermal(p: HydroParams | None = None, singleton: bool = False) -> Instance:
    """Hydro-thermal planning instance; the state is the vector of storage levels.

    Stage-``t`` inflows are ``N`` lognormal samples; the ambiguity set is the
    Wasserstein ball around the uniform empirical distribution with radius
    ``beta`` times the sum of pairwise sample distances.  ``singleton=True``
    replaces every ball by the plain empirical distribution.
    """
    p = p or HydroParams()
    p.check()
    K, L, T, N = p.K, p.plants_per_region, p.T, p.N
    rng = np.random.default_rng(p.seed)
    cg = rng.uniform(*p.thermal_cost, size=K * L)
    n_pairs = K * (K - 1)
    ce = np.full(n_pairs, p.exchange_cost)
    ca = rng.uniform(*p.deficit_cost, size=n_pairs)
    mean_factor = math.exp(p.inflow_log_mean + p.inflow_log_std ** 2 / 2)
    scale = p.inflow_share * p.demand / mean_factor
    raw = rng.lognormal(p.inflow_log_mean, p.inflow_log_std, size=(T + 1, N, K))
    inflows = scale * raw
    nodes = [[_hydro_node(p, np.full(K, p.inflow_share * p.demand), cg, ce, ca)]]
    sets = []
    p_hat = np.full(N, 1.0 / N)
    for t in range(2, T + 1):
        w = inflows[t]
        nodes.append([_hydro_node(p, w[n], cg, ce, ca) for n in range(N)])
        dist = np.linalg.norm(w[:, None, :] - w[None, :, :], axis=2)
        dist = 0.5 * (dist + dist.T)
        np.fill_diagonal(dist, 0.0)
        if singleton:
            sets.append(Singleton(p_hat))
        else:
            sets.append(WassersteinBall.relative(p_hat, dist, p.beta))
    diam = np.full(T, p.storage_cap * math.sqrt(K))
    x0 = np.full(K, p.x0_share * p.storage_cap)
    meta = {"family": "hydrothermal", "params": vars(p).copy(), "inflows": inflows}
    return check(Instance(T, nodes, sets, np.full(T - 1, p.reg), x0, diam, meta))


# --- pathological chain ------------------------------------------------------------------

def _chain_node():
    # min y  s.t.  y >= 1 - 2z,  y >= 0,  x <= z + 1/2,  0 <= x <= 1
    rows = [([2.0], [1.0], [0.0], GE, 1.0), ([-1.0], [0.0], [1.0], LE, 0.5)]
    return StageNodeProblem.build(1, 1, 1, rows, cost_y=[1.0])


def gen_pathological_chain(T: int, reg: float | None = None) -> Instance:
    """Deterministic chain whose cost-to-go functions are ``max(0, 1 - 2x)``."""
    if T < 2:
        raise ValueError("the chain needs T >= 2")
    nodes = [[_chain_node()] for _ in range(T)]
    sets = [Singleton([1.0]) for _ in range(T - 1)]
    regs = None if reg is None else np.full(T - 1, float(reg))
    return check(Instance(T, nodes, sets, regs, [0.0], np.ones(T), {"family": "chain"}))


# --- spherical caps and the worst-case family ------------------------------------------------

def cap_bound(d: int, r: float, theta: float) -> float:
    """Volume lower bound on a maximal depth-``theta`` cap packing of the sphere S^d(r)."""
    log_ratio = gammaln(d / 2 + 1) - gammaln(d / 2 + 1.5)
    return ((d * d - 1) * math.sqrt(math.pi) / d) * math.exp(log_ratio) \
        * (r / (2 * theta)) ** ((d - 1) / 2)


def caps_disjoint(W, r: float, theta: float) -> bool:
    """Check that no member of ``W`` lies in another member's depth-``theta`` cap."""
    W = np.asarray(W, dtype=float)
    for i in range(len(W)):
        for j in range(len(W)):
            if i != j and np.dot(W[j] - W[i], W[i]) >= -theta * r:
                return False
    return True


def sphere_cap_points(d: int, r: float, theta: float, budget: int | None = None,
                      seed: int = 0) -> np.ndarray:
    """Greedy packing of S^d(r) in R^{d+1}: no point lies in another's depth-``theta`` cap.

    Random directions are accepted while they stay out of every accepted cap;
    the search stops after ``budget`` rejections in a row.
    """
    if d < 1 or r <= 0:
        raise ValueError("need d >= 1 and r > 0")
    if not 0 < theta < (1 - math.sqrt(2) / 2) * r:
        raise InvalidDepth(f"depth {theta} outside (0, (1 - sqrt(2)/2) r)")
    if budget is None:
        budget = max(100, 10 * math.ceil(cap_bound(d, r, theta)))
    rng = np.random.default_rng(seed)
    accepted = np.zeros((0, d + 1))
    streak = 0
    while streak < budget:
        g = rng.standard_normal(d + 1)
        w = r * g / np.linalg.norm(g)
        if accepted.shape[0]:
            fwd = (accepted - w) @ w  # an accepted point inside the cap of w
            bwd = np.einsum("ij,ij->i", w - accepted, accepted)  # w inside an accepted cap
            if np.any(fwd >= -theta * r) or np.any(bwd >= -theta * r):
                streak += 1
                continue
        accepted = np.vstack([accepted, w])
        streak = 0
    return accepted


@dataclass
class WorstCaseParams:
    T: int = 4
    d: int = 3
    L: float = 1.0
    r: float = 1.0
    eps: float = 0.1
    reg: float | None = None  # defaults to L
    budget: int | None = None
    seed: int = 0

    def lipschitz(self) -> np.ndarray:
        """``l_1 .. l_T`` linearly from L down to L/2."""
        return np.linspace(self.L, self.L / 2, self.T)

    def eps_t(self) -> float:
        return 2 * self.eps / (self.T - 2)

    def thetas(self) -> np.ndarray:
        return self.eps_t() / self.lipschitz()

    def check(self):
        if self.T < 3 or self.d < 3:
            raise ValueError("need T >= 3 and d >= 3")
        if not self.L > 0 or not self.r > 0 or not self.eps > 0:
            raise ValueError("L, r and eps must be positive")
        if np.any(self.thetas() >= (1 - math.sqrt(2) / 2) * self.r):
            raise InvalidDepth("eps too large for the cap depth condition")


def _worstcase_node(d, r, w_next, l_next, W_prev, v_prev, l_prev):
    """Node cost ``F(z) + l_next ||x - w_next||_1`` with ``F`` from (W_prev, v_prev, l_prev)."""
    # y = (phi, s_1..s_d)
    rows = []
    if W_prev is not None:
        for w, v in zip(W_prev, v_prev):
            # phi - (l/r) w.z >= v - (l/r) |w|^2
            rows.append((-(l_prev / r) * w, {0: 1.0}, None, GE, v - (l_prev / r) * float(w @ w)))
    for i in range(d):
        rows.append((None, {1 + i: 1.0}, {i: -1.0}, GE, -w_next[i]))
        rows.append((None, {1 + i: 1.0}, {i: 1.0}, GE, w_next[i]))
    cost_y = np.concatenate([[1.0], np.full(d, l_next)])
    return StageNodeProblem.build(d, 1 + d, d, rows, cost_y=cost_y,
                                  x_bounds=[(-r, r)] * d)


def worstcase_F(W, v, l, r, x) -> float:
    """``max(0, max_k v_k + (l/r) <w_k, x - w_k>)``."""
    W = np.asarray(W, dtype=float)
    return max(0.0, float(np.max(np.asarray(v) + (l / r) * (W @ np.asarray(x) - np.sum(W * W, 1)))))


def gen_worstcase(p: WorstCaseParams | None = None) -> Instance:
    """Instance whose every non-initial stage needs many oracle calls to close its gap.

    Stage ``t >= 2`` has one node per packing point ``w_{t,k}`` of depth
    ``theta_t``; its cost is ``F_{t-1}(z) + l_{t-1} ||x - w_{t,k}||_1`` where
    ``F_{t-1}`` is the max-of-affine function built on the previous stage's
    points (``F_1 = 0``).  The first-stage state is pinned to 0.
    """
    p = p or WorstCaseParams()
    p.check()
    T, d, r = p.T, p.d, p.r
    rng = np.random.default_rng(p.seed)
    l = p.lipschitz()
    eps_t = p.eps_t()
    thetas = p.thetas()
    W = {t: sphere_cap_points(d - 1, r, float(thetas[t - 1]), p.budget,
                              seed=int(rng.integers(2 ** 31))) for t in range(2, T + 1)}
    V = {t: rng.uniform(eps_t / 2, eps_t, size=len(W[t])) for t in range(2, T + 1)}
    first = StageNodeProblem.build(d, 0, d, [], x_bounds=[(0.0, 0.0)] * d)
    nodes = [[first]]
    sets = []
    for t in range(2, T + 1):
        prev = (W[t - 1], V[t - 1], l[t - 2]) if t - 1 >= 2 else (None, None, None)
        nodes.append([_worstcase_node(d, r, w, l[t - 2], *prev) for w in W[t]])
        sets.append(FullSimplex(len(W[t])))
    reg = p.L if p.reg is None else p.reg
    diam = np.full(T, 2 * r * math.sqrt(d))
    diam[0] = 0.0
    meta = {"family": "worstcase", "params": vars(p).copy(), "W": W, "v": V, "l": l,
            "eps_t": eps_t, "thetas": thetas}
    return check(Instance(T, nodes, sets, np.full(T - 1, float(reg)), np.zeros(d), diam, meta))


# --- small fixtures -------------------------------------------------------------------------

def t2_tiny(ambiguity: str = "simplex", reg: float | None = 5.0) -> Instance:
    """Two stages: pick ``x`` in [0, 1] at unit cost; stage 2 pays ``max(0, 1-2x)`` or ``x``.

    With the full simplex the value is 2/3 at x = 1/3; with equal weights it is 1/2 at x = 0.
    """
    first = StageNodeProblem.build(1, 0, 1, [], cost_x=[1.0], x_bounds=[(0.0, 1.0)])
    a = StageNodeProblem.build(1, 1, 0, [([2.0], [1.0], [], GE, 1.0)], cost_y=[1.0])
    b = StageNodeProblem.build(1, 1, 0, [([-1.0], [1.0], [], GE, 0.0)], cost_y=[1.0])
    amb = FullSimplex(2) if ambiguity == "simplex" else Singleton([0.5, 0.5])
    regs = None if reg is None else [float(reg)]
    return check(Instance(2, [[first], [a, b]], [amb], regs, [0.0], [1.0, 0.0],
                          {"family": "t2tiny", "ambiguity": ambiguity}))


def t1_trivial() -> Instance:
    """Single stage: minimize ``x`` subject to ``x >= 0.25``."""
    node = StageNodeProblem.build(1, 0, 1, [(None, None, [1.0], GE, 0.25)], cost_x=[1.0])
    return check(Instance(1, [[node]], [], None, [0.0], [1.0], {"family": "t1"}))


def _random_node(rng, d_in, d_out, xi):
    """Tracking node: pay ``c . |x - A z - xi| + q . x`` with ``x`` in [0, 1]^d."""
    A = rng.uniform(-0.8, 0.8, size=(d_out, d_in))
    c = rng.uniform(0.2, 1.5, size=d_out)
    q = rng.uniform(0.0, 0.5, size=d_out)
    rows = []
    for i in range(d_out):
        # y_i >= x_i - A_i z - xi_i  and  y_i >= -(x_i - A_i z - xi_i)
        rows.append((A[i], {i: 1.0}, {i: -1.0}, GE, -xi[i]))
        rows.append((-A[i], {i: 1.0}, {i: 1.0}, GE, xi[i]))
    return StageNodeProblem.build(d_in, d_out, d_out, rows, cost_y=c, cost_x=q)


def gen_random_small(seed: int, T: int = 3, max_nodes: int = 3, max_dim: int = 2,
                     reg: float = 10.0, kinds=None) -> Instance:
    """Random small instance with mixed ambiguity kinds, for cross-checks."""
    rng = np.random.default_rng(seed)
    dims = [int(rng.integers(1, max_dim + 1)) for _ in range(T + 1)]
    dims[0] = dims[1]
    x0 = rng.uniform(0, 1, size=dims[0])
    nodes = [[_random_node(rng, dims[0], dims[1], rng.uniform(0, 1, dims[1]))]]
    sets = []
    kinds = kinds or ("singleton", "simplex", "wasserstein")
    for t in range(2, T + 1):
        n = int(rng.integers(1, max_nodes + 1))
        xis = rng.uniform(-0.5, 1.5, size=(n, dims[t]))
        nodes.append([_random_node(rng, dims[t - 1], dims[t], xi) for xi in xis])
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "singleton":
            sets.append(Singleton(rng.dirichlet(np.ones(n))))
        elif kind == "simplex":
            sets.append(FullSimplex(n))
        else:
            dist = np.abs(xis[:, None, :] - xis[None, :, :]).sum(axis=2)
            sets.append(WassersteinBall.relative(rng.dirichlet(np.ones(n)), dist,
                                                 float(rng.uniform(0, 0.2))))
    diam = np.array([math.sqrt(dims[t]) for t in range(1, T + 1)])
    return check(Instance(T, nodes, sets, np.full(T - 1, reg), x0, diam,
                          {"family": "random", "seed": seed}))
