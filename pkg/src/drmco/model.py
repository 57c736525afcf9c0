"""DR-MCO instances: node subproblems, validation, JSON files, extensive form.

A stage-``t`` node problem is a linear program over ``(z, y, x)`` where ``z``
is the copy of the incoming state ``x_{t-1}``, ``y`` the internal variables
and ``x`` the outgoing state.  Its cost is ``cost_z @ z + cost_y @ y +
cost_x @ x + cost_const`` on the polyhedron given by ``rows`` and the
variable bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import json
import math
from pathlib import Path

import numpy as np

from . import ambiguity as amb_mod
from .ambiguity import FullSimplex, Singleton, WassersteinBall
from .lp_core import EQ, GE, LE, SENSES, LinearProgram, solve_lp

UNREGULARIZED = "unregularized"
SUPPORT_LIMIT = 100_000

ERROR, WARNING = "Error", "Warning"


class ModelError(Exception):
    pass


class ParseError(ModelError):
    pass


class SchemaError(ModelError):
    pass


class ValidationError(ModelError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class TooLarge(ModelError):
    pass


class DimensionTooLarge(ModelError):
    pass


def _arr(v, shape=None):
    a = np.asarray(v, dtype=float)
    return a.reshape(shape) if shape is not None else a


@dataclass
class StageNodeProblem:
    cost_z: np.ndarray
    cost_y: np.ndarray
    cost_x: np.ndarray
    cost_const: float
    Az: np.ndarray
    Ay: np.ndarray
    Ax: np.ndarray
    senses: list
    rhs: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray

    def __post_init__(self):
        self.cost_z = _arr(self.cost_z).reshape(-1)
        self.cost_y = _arr(self.cost_y).reshape(-1)
        self.cost_x = _arr(self.cost_x).reshape(-1)
        self.cost_const = float(self.cost_const)
        self.rhs = _arr(self.rhs).reshape(-1)
        m = self.rhs.size
        self.Az = _arr(self.Az).reshape(m, self.cost_z.size)
        self.Ay = _arr(self.Ay).reshape(m, self.cost_y.size)
        self.Ax = _arr(self.Ax).reshape(m, self.cost_x.size)
        self.senses = list(self.senses)
        self.y_lo = _arr(self.y_lo).reshape(-1)
        self.y_hi = _arr(self.y_hi).reshape(-1)
        self.x_lo = _arr(self.x_lo).reshape(-1)
        self.x_hi = _arr(self.x_hi).reshape(-1)

    @property
    def state_dim_in(self) -> int:
        return self.cost_z.size

    @property
    def internal_dim(self) -> int:
        return self.cost_y.size

    @property
    def state_dim_out(self) -> int:
        return self.cost_x.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    @classmethod
    def build(cls, d_in, n_y, d_out, rows=(), cost_z=None, cost_y=None, cost_x=None,
              cost_const=0.0, y_bounds=None, x_bounds=None):
        """Convenience constructor; ``rows`` holds ``(z, y, x, sense, rhs)`` tuples
        where each coefficient part may be a dense list or a ``{index: coef}`` dict."""
        def dense(part, size):
            v = np.zeros(size)
            if isinstance(part, dict):
                for k, c in part.items():
                    v[k] = c
            elif part is not None:
                v[:] = part
            return v

        Az = np.array([dense(r[0], d_in) for r in rows]).reshape(len(rows), d_in)
        Ay = np.array([dense(r[1], n_y) for r in rows]).reshape(len(rows), n_y)
        Ax = np.array([dense(r[2], d_out) for r in rows]).reshape(len(rows), d_out)
        yb = y_bounds if y_bounds is not None else [(0.0, math.inf)] * n_y
        xb = x_bounds if x_bounds is not None else [(0.0, 1.0)] * d_out
        return cls(
            dense(cost_z, d_in), dense(cost_y, n_y), dense(cost_x, d_out), cost_const,
            Az, Ay, Ax, [r[3] for r in rows], [r[4] for r in rows],
            [b[0] for b in yb], [b[1] for b in yb], [b[0] for b in xb], [b[1] for b in xb],
        )

    def cost(self, z, y, x) -> float:
        return float(self.cost_z @ z + self.cost_y @ y + self.cost_x @ x + self.cost_const)


@dataclass
class Instance:
    T: int
    nodes: list  # nodes[t-1] lists the StageNodeProblems of stage t
    ambiguity: list  # ambiguity[t-1] is the set over the nodes of stage t+1
    reg_factors: np.ndarray | None  # M_t for t = 1..T-1, None when unregularized
    x0: np.ndarray
    diameters: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x0 = _arr(self.x0).reshape(-1)
        self.diameters = _arr(self.diameters).reshape(-1)
        if self.reg_factors is not None:
            self.reg_factors = _arr(self.reg_factors).reshape(-1)

    @property
    def regularized(self) -> bool:
        return self.reg_factors is not None

    def stage(self, t: int) -> list:
        return self.nodes[t - 1]

    def dim(self, t: int) -> int:
        """State dimension ``d_t``; ``d_0`` is the length of ``x0``."""
        if t == 0:
            return self.x0.size
        return self.nodes[t - 1][0].state_dim_out

    def reg(self, t: int) -> float | None:
        """Regularization factor ``M_t`` (penalty on stage t+1 copies)."""
        if self.reg_factors is None:
            return None
        return float(self.reg_factors[t - 1])

    def state_box(self, t: int):
        """Bounding box of the state space of stage ``t`` (``x0`` for t = 0)."""
        if t == 0:
            return self.x0.copy(), self.x0.copy()
        lo = np.min([n.x_lo for n in self.stage(t)], axis=0)
        hi = np.max([n.x_hi for n in self.stage(t)], axis=0)
        return lo, hi

    def with_reg(self, reg):
        """Copy with different regularization factors (scalar, vector or None)."""
        if reg is not None:
            reg = np.broadcast_to(np.asarray(reg, dtype=float), (self.T - 1,)).copy()
        return Instance(self.T, self.nodes, self.ambiguity, reg, self.x0, self.diameters,
                        dict(self.meta))

    def with_ambiguity(self, sets):
        return Instance(self.T, self.nodes, list(sets), self.reg_factors, self.x0,
                        self.diameters, dict(self.meta))


@dataclass
class Diagnostic:
    severity: str
    location: str
    message: str


# --- file format ---------------------------------------------------------------

_NODE_KEYS = {"cost_z", "cost_y", "cost_x", "cost_const", "rows", "y_bounds", "x_bounds"}
_ROW_KEYS = {"z", "y", "x", "sense", "rhs"}
_TOP_KEYS = {"T", "stages", "ambiguity", "reg_factors", "x0", "diameters"}


def _f(v):
    return None if not math.isfinite(v) else float(v)


def _node_to_json(n: StageNodeProblem) -> dict:
    return {
        "cost_z": n.cost_z.tolist(),
        "cost_y": n.cost_y.tolist(),
        "cost_x": n.cost_x.tolist(),
        "cost_const": n.cost_const,
        "rows": [
            {"z": n.Az[i].tolist(), "y": n.Ay[i].tolist(), "x": n.Ax[i].tolist(),
             "sense": n.senses[i], "rhs": float(n.rhs[i])}
            for i in range(n.n_rows)
        ],
        "y_bounds": [[_f(a), _f(b)] for a, b in zip(n.y_lo, n.y_hi)],
        "x_bounds": [[_f(a), _f(b)] for a, b in zip(n.x_lo, n.x_hi)],
    }


def _bound(v, default):
    return default if v is None else float(v)


def _node_from_json(d: dict, where: str) -> StageNodeProblem:
    keys = set(d)
    if keys != _NODE_KEYS:
        raise SchemaError(f"{where}: expected keys {sorted(_NODE_KEYS)}, got {sorted(keys)}")
    rows = d["rows"]
    for i, r in enumerate(rows):
        if set(r) != _ROW_KEYS:
            raise SchemaError(f"{where} row {i}: expected keys {sorted(_ROW_KEYS)}")
        if r["sense"] not in SENSES:
            raise SchemaError(f"{where} row {i}: unknown sense {r['sense']!r}")
    d_in, n_y, d_out = len(d["cost_z"]), len(d["cost_y"]), len(d["cost_x"])
    for i, r in enumerate(rows):
        if (len(r["z"]), len(r["y"]), len(r["x"])) != (d_in, n_y, d_out):
            raise SchemaError(f"{where} row {i}: coefficient lengths disagree with costs")
    if len(d["y_bounds"]) != n_y or len(d["x_bounds"]) != d_out:
        raise SchemaError(f"{where}: bound counts disagree with variable counts")
    m = len(rows)
    return StageNodeProblem(
        d["cost_z"], d["cost_y"], d["cost_x"], d["cost_const"],
        np.array([r["z"] for r in rows], dtype=float).reshape(m, d_in),
        np.array([r["y"] for r in rows], dtype=float).reshape(m, n_y),
        np.array([r["x"] for r in rows], dtype=float).reshape(m, d_out),
        [r["sense"] for r in rows], [r["rhs"] for r in rows],
        [_bound(b[0], -math.inf) for b in d["y_bounds"]],
        [_bound(b[1], math.inf) for b in d["y_bounds"]],
        [_bound(b[0], -math.inf) for b in d["x_bounds"]],
        [_bound(b[1], math.inf) for b in d["x_bounds"]],
    )


def instance_to_json(inst: Instance) -> dict:
    return {
        "T": inst.T,
        "stages": [[_node_to_json(n) for n in stage] for stage in inst.nodes],
        "ambiguity": [amb_mod.to_json(a) for a in inst.ambiguity],
        "reg_factors": UNREGULARIZED if inst.reg_factors is None else inst.reg_factors.tolist(),
        "x0": inst.x0.tolist(),
        "diameters": inst.diameters.tolist(),
    }


def instance_from_json(d: dict) -> Instance:
    if not isinstance(d, dict) or set(d) != _TOP_KEYS:
        got = sorted(d) if isinstance(d, dict) else type(d).__name__
        raise SchemaError(f"expected top-level keys {sorted(_TOP_KEYS)}, got {got}")
    try:
        nodes = [[_node_from_json(n, f"stage {t + 1} node {k}") for k, n in enumerate(stage)]
                 for t, stage in enumerate(d["stages"])]
        sets = [amb_mod.from_json(a) for a in d["ambiguity"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed field: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    reg = d["reg_factors"]
    if reg == UNREGULARIZED:
        reg = None
    elif not isinstance(reg, list):
        raise SchemaError("reg_factors must be a list or 'unregularized'")
    return Instance(int(d["T"]), nodes, sets, reg, d["x0"], d["diameters"])


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_json(inst), indent=1), encoding="utf-8")


def load_instance(path) -> Instance:
    """Read and validate an instance file; Error diagnostics raise ValidationError."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    inst = instance_from_json(raw)
    diags = validate(inst)
    errors = [d for d in diags if d.severity == ERROR]
    if errors:
        raise ValidationError("; ".join(f"{d.location}: {d.message}" for d in errors), diags)
    return inst


# --- validation ----------------------------------------------------------------

def _node_min_cost(node: StageNodeProblem, z_lo, z_hi):
    """Minimum of the node cost over its feasible set with z in the given box."""
    dz, ny, dx = node.state_dim_in, node.internal_dim, node.state_dim_out
    c = np.concatenate([node.cost_z, node.cost_y, node.cost_x])
    A = np.hstack([node.Az, node.Ay, node.Ax])
    lo = np.concatenate([z_lo, node.y_lo, node.x_lo])
    hi = np.concatenate([z_hi, node.y_hi, node.x_hi])
    lp = LinearProgram(c, A.reshape(node.n_rows, dz + ny + dx), node.senses, node.rhs, lo, hi,
                       constant=node.cost_const)
    return solve_lp(lp)


def validate(inst: Instance) -> list:
    """Check the modelling assumptions; returns a list of :class:`Diagnostic`."""
    out = []

    def err(loc, msg):
        out.append(Diagnostic(ERROR, loc, msg))

    if inst.T < 1 or len(inst.nodes) != inst.T:
        err("instance", f"T={inst.T} but {len(inst.nodes)} stages given")
        return out
    if len(inst.stage(1)) != 1:
        err("stage 1", "the first stage must have exactly one node")
    if len(inst.ambiguity) != inst.T - 1:
        err("ambiguity", f"expected {inst.T - 1} ambiguity sets, got {len(inst.ambiguity)}")
    if inst.reg_factors is not None:
        if inst.reg_factors.size != inst.T - 1:
            err("reg_factors", f"expected {inst.T - 1} regularization factors")
        elif np.any(~(inst.reg_factors > 0)) or not np.all(np.isfinite(inst.reg_factors)):
            err("reg_factors", "regularization factor must be positive")
    if inst.diameters.size != inst.T:
        err("diameters", f"expected {inst.T} declared diameters")
    if out:
        return out
    for t in range(1, inst.T + 1):
        stage = inst.stage(t)
        if not stage:
            err(f"stage {t}", "stage has no nodes")
            continue
        d_out = stage[0].state_dim_out
        if t < inst.T and inst.ambiguity[t - 1].size != len(inst.stage(t + 1)):
            err(f"ambiguity {t}", f"support size {inst.ambiguity[t - 1].size} but stage {t + 1} "
                f"has {len(inst.stage(t + 1))} nodes")
        d_in_expected = inst.dim(t - 1)
        for k, node in enumerate(stage):
            loc = f"stage {t} node {k}"
            if node.state_dim_out != d_out:
                err(loc, "outgoing state dimension differs within the stage")
            if node.state_dim_in != d_in_expected:
                err(loc, f"incoming state dimension {node.state_dim_in} != {d_in_expected}")
            if not (np.all(np.isfinite(node.x_lo)) and np.all(np.isfinite(node.x_hi))):
                err(loc, "state bounds must be finite (compact state space)")
            if np.any(node.x_lo > node.x_hi) or np.any(node.y_lo > node.y_hi):
                err(loc, "lower bound exceeds upper bound")
        if any(d.location.startswith(f"stage {t}") for d in out if d.severity == ERROR):
            continue
        if t > 1 and any(d.severity == ERROR for d in out):
            continue
        z_lo, z_hi = inst.state_box(t - 1)
        for k, node in enumerate(stage):
            loc = f"stage {t} node {k}"
            sol = _node_min_cost(node, z_lo, z_hi)
            if sol.status == "Infeasible":
                err(loc, "feasible set is empty")
            elif sol.status == "Unbounded":
                err(loc, "cost is unbounded below")
            elif sol.objective_value < -1e-9:
                err(loc, f"cost must be nonnegative (minimum {sol.objective_value:.6g})")
        lo, hi = inst.state_box(t)
        implied = float(np.linalg.norm(hi - lo))
        if np.all(np.isfinite([implied])) and inst.diameters[t - 1] < implied - 1e-9:
            out.append(Diagnostic(WARNING, f"diameters {t}",
                                  f"declared {inst.diameters[t - 1]:.6g} below box diagonal "
                                  f"{implied:.6g}"))
    return out


def check(inst: Instance) -> Instance:
    errors = [d for d in validate(inst) if d.severity == ERROR]
    if errors:
        raise ValidationError("; ".join(f"{d.location}: {d.message}" for d in errors), errors)
    return inst


# --- polytope vertices ---------------------------------------------------------

def vertices_to_dr(box_lo, box_hi, builder):
    """Nodes for every vertex of a box, plus the simplex ambiguity over them.

    Vertices are enumerated lexicographically by sign pattern with ``-``
    (lower end) before ``+``.
    """
    lo = np.asarray(box_lo, dtype=float).reshape(-1)
    hi = np.asarray(box_hi, dtype=float).reshape(-1)
    if lo.size != hi.size or np.any(lo > hi):
        raise ValueError("box bounds must have equal length and lo <= hi")
    if lo.size > 20:
        raise DimensionTooLarge(f"{lo.size} factors give 2^{lo.size} vertices")
    nodes = []
    for pattern in itertools.product((0, 1), repeat=lo.size):
        xi = np.where(np.array(pattern, dtype=bool), hi, lo)
        nodes.append(builder(xi))
    return nodes, FullSimplex(len(nodes))


# --- extensive form --------------------------------------------------------------

class _Cols:
    """Column allocator for incrementally assembled LPs."""

    def __init__(self):
        self.c, self.lo, self.hi = [], [], []
        self.rows = []  # (dict col->coef, sense, rhs)

    def add(self, n, cost=0.0, lo=0.0, hi=math.inf):
        start = len(self.c)
        self.c.extend(np.broadcast_to(np.asarray(cost, dtype=float), (n,)).tolist())
        self.lo.extend(np.broadcast_to(np.asarray(lo, dtype=float), (n,)).tolist())
        self.hi.extend(np.broadcast_to(np.asarray(hi, dtype=float), (n,)).tolist())
        return np.arange(start, start + n)

    def row(self, coefs, sense, rhs):
        self.rows.append((coefs, sense, float(rhs)))

    def lp(self, constant=0.0) -> LinearProgram:
        n = len(self.c)
        A = np.zeros((len(self.rows), n))
        for i, (coefs, _, _) in enumerate(self.rows):
            for j, v in coefs.items():
                A[i, j] += v
        return LinearProgram(np.array(self.c), A, [r[1] for r in self.rows],
                             [r[2] for r in self.rows], np.array(self.lo), np.array(self.hi),
                             constant=constant)


def _path_count(inst: Instance, start: int) -> int:
    total, width = 0, 1
    for t in range(start + 1, inst.T + 1):
        width *= len(inst.stage(t))
        total += width
    return total


def _add_node(cols: _Cols, node: StageNodeProblem, parent_x, penalty, z_box):
    """Columns for one tree node; returns (x columns, dict of cost terms, constant)."""
    dz = node.state_dim_in
    if penalty is None:
        z = cols.add(dz, lo=-math.inf)
        for i in range(dz):
            if isinstance(parent_x, np.ndarray) and parent_x.dtype.kind == "f":
                cols.row({int(z[i]): 1.0}, EQ, parent_x[i])
            else:
                cols.row({int(z[i]): 1.0, int(parent_x[i]): -1.0}, EQ, 0.0)
    else:
        z = cols.add(dz, lo=z_box[0], hi=z_box[1])
    y = cols.add(node.internal_dim, lo=node.y_lo, hi=node.y_hi)
    x = cols.add(node.state_dim_out, lo=node.x_lo, hi=node.x_hi)
    terms = {}
    for j, v in zip(z, node.cost_z):
        terms[int(j)] = terms.get(int(j), 0.0) + v
    for j, v in zip(y, node.cost_y):
        terms[int(j)] = terms.get(int(j), 0.0) + v
    for j, v in zip(x, node.cost_x):
        terms[int(j)] = terms.get(int(j), 0.0) + v
    const = node.cost_const
    if penalty is not None:
        s = cols.add(dz)
        for i in range(dz):
            fixed = isinstance(parent_x, np.ndarray) and parent_x.dtype.kind == "f"
            # s_i >= |parent_i - z_i|
            if fixed:
                cols.row({int(s[i]): 1.0, int(z[i]): 1.0}, GE, parent_x[i])
                cols.row({int(s[i]): 1.0, int(z[i]): -1.0}, GE, -parent_x[i])
            else:
                cols.row({int(s[i]): 1.0, int(z[i]): 1.0, int(parent_x[i]): -1.0}, GE, 0.0)
                cols.row({int(s[i]): 1.0, int(z[i]): -1.0, int(parent_x[i]): 1.0}, GE, 0.0)
            terms[int(s[i])] = terms.get(int(s[i]), 0.0) + penalty
    for r in range(node.n_rows):
        coefs = {}
        for block, a in ((z, node.Az[r]), (y, node.Ay[r]), (x, node.Ax[r])):
            for j, v in zip(block, a):
                if v != 0.0:
                    coefs[int(j)] = coefs.get(int(j), 0.0) + v
        cols.row(coefs, node.senses[r], node.rhs[r])
    return x, terms, const


def _add_worst_case(cols: _Cols, c_parent: int, q_cols, amb):
    """Rows forcing ``c_parent >= max_{p in amb} p @ q``, by LP duality."""
    if isinstance(amb, Singleton):
        coefs = {c_parent: 1.0}
        for q, p in zip(q_cols, amb.p_hat):
            coefs[int(q)] = coefs.get(int(q), 0.0) - p
        cols.row(coefs, GE, 0.0)
    elif isinstance(amb, FullSimplex):
        for q in q_cols:
            cols.row({c_parent: 1.0, int(q): -1.0}, GE, 0.0)
    else:
        n = amb.size
        alpha = cols.add(n, lo=-math.inf)
        beta = cols.add(1)[0]
        coefs = {c_parent: 1.0, int(beta): -amb.sigma}
        for a, p in zip(alpha, amb.p_hat):
            coefs[int(a)] = -p
        cols.row(coefs, GE, 0.0)
        for j in range(n):
            for k in range(n):
                cols.row({int(alpha[k]): 1.0, int(beta): amb.dist[j, k], int(q_cols[j]): -1.0},
                         GE, 0.0)


def _expand(cols, inst, t, parent_x, c_parent, regularized):
    """Attach the subtree of stage-(t+1) children below a stage-t tree node."""
    children = inst.stage(t + 1)
    penalty = inst.reg(t) if regularized else None
    z_box = inst.state_box(t)
    q_cols = []
    for node in children:
        x, terms, const = _add_node(cols, node, parent_x, penalty, z_box)
        q = cols.add(1, lo=-math.inf)[0]
        coefs = {int(q): 1.0}
        for j, v in terms.items():
            coefs[j] = coefs.get(j, 0.0) - v
        if t + 1 < inst.T:
            c_child = cols.add(1, lo=-math.inf)[0]
            coefs[int(c_child)] = -1.0
            _expand(cols, inst, t + 1, x, int(c_child), regularized)
        cols.row(coefs, EQ, const)
        q_cols.append(q)
    _add_worst_case(cols, c_parent, q_cols, inst.ambiguity[t - 1])


def extensive_form(inst: Instance, support_limit: int = SUPPORT_LIMIT,
                   regularized: bool = False) -> LinearProgram:
    """Single LP over all stage-wise node paths; its optimum is the problem value.

    The inner worst case at every tree node is replaced by its LP dual.  With
    ``regularized=True`` the state links carry the norm penalties instead of
    hard copies, giving the value of the regularized problem.
    """
    paths = _path_count(inst, 1)
    if paths > support_limit:
        raise TooLarge(f"{paths} tree nodes exceed the limit {support_limit}")
    if regularized and inst.reg_factors is None:
        raise ValueError("instance is unregularized")
    cols = _Cols()
    root = inst.stage(1)[0]
    x, terms, const = _add_node(cols, root, inst.x0.astype(float), None, None)
    for j, v in terms.items():
        cols.c[j] += v
    if inst.T > 1:
        c1 = cols.add(1, cost=1.0, lo=-math.inf)[0]
        _expand(cols, inst, 1, x, int(c1), regularized)
    return cols.lp(constant=const)


def extensive_cost_to_go(inst: Instance, t: int, x, regularized: bool = True,
                         support_limit: int = SUPPORT_LIMIT) -> float:
    """Value of the stage-``t`` cost-to-go function at state ``x`` by brute force."""
    if t >= inst.T:
        return 0.0
    if _path_count(inst, t) > support_limit:
        raise TooLarge("subtree too large")
    cols = _Cols()
    c = cols.add(1, cost=1.0, lo=-math.inf)[0]
    _expand(cols, inst, t, np.asarray(x, dtype=float), int(c), regularized)
    sol = solve_lp(cols.lp())
    if not sol.optimal:
        raise ModelError(f"cost-to-go LP at stage {t} is {sol.status}")
    return sol.objective_value


def solve_extensive(inst: Instance, regularized: bool = False,
                    support_limit: int = SUPPORT_LIMIT):
    """Optimal value and first-stage state of the extensive form."""
    lp = extensive_form(inst, support_limit, regularized)
    sol = solve_lp(lp)
    if not sol.optimal:
        raise ModelError(f"extensive form is {sol.status}")
    root = inst.stage(1)[0]
    start = root.state_dim_in + root.internal_dim
    return sol.objective_value, sol.primal[start: start + root.state_dim_out]
