"""Linear programs and a dense two-phase simplex solver.

Every subproblem in the package (stage LPs, envelope evaluations, worst-case
distributions, the extensive form) is expressed as a :class:`LinearProgram`
and solved by :func:`solve_lp`.

Dual values follow the sensitivity convention: ``dual[i]`` is the derivative
of the optimal objective with respect to ``rhs[i]``.  In a minimization this
makes duals of ``>=`` rows nonnegative and duals of ``<=`` rows nonpositive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
BLAND_AFTER = 500
REFACTOR_EVERY = 50

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


class LpError(Exception):
    pass


class MalformedProgram(LpError):
    pass


class NumericalBreakdown(LpError):
    pass


@dataclass
class LinearProgram:
    """``min objective @ x + constant`` subject to rows and variable bounds."""

    objective: np.ndarray
    A: np.ndarray
    senses: list
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float = 0.0
    var_names: list | None = None
    row_names: list | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.senses = list(self.senses)
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_rows(cls, objective, rows, bounds, constant=0.0, var_names=None, row_names=None):
        """Build from ``rows = [(coeffs, sense, rhs), ...]`` and ``bounds = [(lo, hi), ...]``."""
        objective = np.asarray(objective, dtype=float)
        n = objective.size
        for coeffs, _, _ in rows:
            if len(coeffs) != n:
                raise MalformedProgram(f"row has {len(coeffs)} coefficients, expected {n}")
        if len(bounds) != n:
            raise MalformedProgram(f"{len(bounds)} bounds given for {n} variables")
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n)
        lo = np.array([-math.inf if b[0] is None else b[0] for b in bounds], dtype=float)
        hi = np.array([math.inf if b[1] is None else b[1] for b in bounds], dtype=float)
        return cls(objective, A, [r[1] for r in rows], [r[2] for r in rows], lo, hi,
                   constant=constant, var_names=var_names, row_names=row_names)

    def check(self) -> None:
        n, m = self.n_vars, self.n_rows
        if self.A.shape != (m, n):
            raise MalformedProgram(f"constraint matrix shape {self.A.shape} != {(m, n)}")
        if self.rhs.size != m or len(self.senses) != m:
            raise MalformedProgram("rhs/sense count does not match row count")
        if self.lower.size != n or self.upper.size != n:
            raise MalformedProgram("bound vectors do not match variable count")
        for s in self.senses:
            if s not in SENSES:
                raise MalformedProgram(f"unknown row sense {s!r}")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise MalformedProgram(f"variable {j}: lower bound exceeds upper bound")
        if np.any(self.lower == math.inf) or np.any(self.upper == -math.inf):
            raise MalformedProgram("bounds of +inf below or -inf above")
        finite = [self.objective, self.A, self.rhs]
        if not all(np.all(np.isfinite(a)) for a in finite):
            raise MalformedProgram("objective, matrix and rhs must be finite")


@dataclass
class LpSolution:
    status: str
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_value: float = math.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Standard:
    """``min c @ u  s.t.  M @ u = b, u >= 0`` built from a LinearProgram.

    Original variables are recovered as ``x = offset + S @ u[:n_std]``.
    Every row owns exactly one identity column (a slack or an artificial),
    which is where the basis starts and where duals are read back.
    """

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        lo, hi = lp.lower, lp.upper
        cols = []  # (original index, sign)
        offset = np.zeros(n)
        bound_rows = []  # (std col, width)
        for j in range(n):
            if math.isfinite(lo[j]):
                offset[j] = lo[j]
                cols.append((j, 1.0))
                if math.isfinite(hi[j]):
                    bound_rows.append((len(cols) - 1, hi[j] - lo[j]))
            elif math.isfinite(hi[j]):
                offset[j] = hi[j]
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        ns = len(cols)
        S = np.zeros((n, ns))
        for k, (j, sg) in enumerate(cols):
            S[j, k] = sg
        m0 = lp.n_rows
        m = m0 + len(bound_rows)
        A = np.zeros((m, ns))
        A[:m0] = lp.A @ S
        b = np.empty(m)
        b[:m0] = lp.rhs - lp.A @ offset
        senses = list(lp.senses) + [LE] * len(bound_rows)
        for r, (k, width) in enumerate(bound_rows):
            A[m0 + r, k] = 1.0
            b[m0 + r] = width

        # slack columns for inequality rows
        ineq = [i for i in range(m) if senses[i] != EQ]
        n_slack = len(ineq)
        slack_of = {}
        A_s = np.zeros((m, n_slack))
        for k, i in enumerate(ineq):
            A_s[i, k] = 1.0 if senses[i] == LE else -1.0
            slack_of[i] = k
        A_full = np.hstack([A, A_s])
        flip = np.where(b < 0, -1.0, 1.0)
        A_full *= flip[:, None]
        b = b * flip

        # identity column per row: a slack with +1 after flipping, else an artificial
        ident = np.empty(m, dtype=int)
        art_rows = []
        for i in range(m):
            k = slack_of.get(i)
            if k is not None and A_full[i, ns + k] > 0:
                ident[i] = ns + k
            else:
                art_rows.append(i)
        n_art = len(art_rows)
        A_a = np.zeros((m, n_art))
        for k, i in enumerate(art_rows):
            A_a[i, k] = 1.0
            ident[i] = ns + n_slack + k
        self.M = np.hstack([A_full, A_a])
        self.b = b
        self.flip = flip
        self.ident = ident
        self.n_std = ns
        self.n_struct = ns + n_slack
        self.n_art = n_art
        self.m0 = m0
        self.S = S
        self.offset = offset
        c = np.zeros(self.M.shape[1])
        c[:ns] = lp.objective @ S
        self.c = c
        self.const = float(lp.objective @ offset) + lp.constant


class _Tableau:
    def __init__(self, std: _Standard):
        self.std = std
        m, N = std.M.shape
        self.T = np.empty((m, N + 1))
        self.T[:, :N] = std.M
        self.T[:, N] = std.b
        self.basis = std.ident.copy()
        self.N = N
        self.iterations = 0
        self.degenerate = 0
        self.bland = False
        self.redundant = []  # rows kept with a zero-level artificial
        self.art_start = std.n_struct

    def reduced_costs(self, c):
        cb = c[self.basis]
        return c - cb @ self.T[:, : self.N]

    def pivot(self, r, q, d):
        T = self.T
        T[r] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        d -= d[q] * T[r, : self.N]
        self.basis[r] = q

    def refactor(self):
        """Rebuild the tableau from the original data and the current basis."""
        M, b = self.std.M, self.std.b
        B = M[:, self.basis]
        try:
            self.T = np.linalg.solve(B, np.hstack([M, b[:, None]]))
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis during refactorization") from exc
        for r in self.redundant:
            self.T[r, : self.art_start] = 0.0
        rhs = self.T[:, self.N]
        rhs[(rhs < 0) & (rhs > -1e-9 * (1.0 + np.abs(b).max(initial=0.0)))] = 0.0

    def _ratio_row(self, col, rhs):
        """Harris two-pass ratio test: among near-minimal ratios take the largest pivot."""
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return None, 0.0
        c = col[rows]
        bound = np.min((np.maximum(rhs[rows], 0.0) + FEAS_TOL) / c)
        ratios = np.maximum(rhs[rows], 0.0) / c
        ok = ratios <= bound
        cand = rows[ok]
        if self.bland:
            best = ratios[ok].min()
            ties = cand[ratios[ok] <= best + FEAS_TOL]
            return int(ties[np.argmin(self.basis[ties])]), best
        k = int(np.argmax(col[cand]))
        return int(cand[k]), ratios[ok][k]

    def run(self, c, allowed):
        """Primal simplex from the current feasible basis; returns 'optimal' or 'unbounded'."""
        N = self.N
        d = self.reduced_costs(c)
        limit = 50 * (self.T.shape[0] + N) + 1000
        since = 0
        while True:
            cand = np.flatnonzero(allowed & (d < -OPT_TOL))
            if cand.size == 0:
                if since == 0:
                    return "optimal"
                # confirm optimality on a freshly factored tableau
                self.refactor()
                d = self.reduced_costs(c)
                since = 0
                continue
            if self.bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmin(d[cand])])
            r, step = self._ratio_row(self.T[:, q], self.T[:, N])
            if r is None:
                if since == 0:
                    return "unbounded"
                self.refactor()
                d = self.reduced_costs(c)
                since = 0
                continue
            if step <= FEAS_TOL:
                self.degenerate += 1
                if self.degenerate >= BLAND_AFTER:
                    self.bland = True
            self.pivot(r, q, d)
            self.iterations += 1
            since += 1
            if since >= REFACTOR_EVERY:
                self.refactor()
                d = self.reduced_costs(c)
                since = 0
            if self.iterations > limit:
                raise NumericalBreakdown("simplex iteration limit exhausted")


def _solve_simplex(lp: LinearProgram) -> LpSolution:
    std = _Standard(lp)
    m, N = std.M.shape
    tab = _Tableau(std)
    art_start = std.n_struct
    structural = np.zeros(N, dtype=bool)
    structural[:art_start] = True

    if std.n_art:
        c1 = np.zeros(N)
        c1[art_start:] = 1.0
        tab.run(c1, np.ones(N, dtype=bool))
        infeas = float(c1[tab.basis] @ tab.T[:, N])
        if infeas > FEAS_TOL * (1.0 + float(np.max(np.abs(std.b), initial=0.0))):
            return LpSolution(INFEASIBLE, iterations=tab.iterations)
        # drive zero-level artificials out of the basis where possible
        for r in range(m):
            if tab.basis[r] >= art_start:
                row = np.abs(tab.T[r, :art_start])
                q = int(np.argmax(row)) if row.size else 0
                if row.size and row[q] > 1e-9:
                    tab.pivot(r, q, np.zeros(N))
                else:
                    # redundant row: keep the artificial basic at level zero
                    tab.T[r, :art_start] = 0.0
                    tab.redundant.append(r)
    status = tab.run(std.c, structural)
    if status == "unbounded":
        return LpSolution(UNBOUNDED, iterations=tab.iterations)

    # recompute the basic solution from the original data to shed pivot error
    B = std.M[:, tab.basis]
    try:
        u_b = np.linalg.solve(B, std.b)
        y = np.linalg.solve(B.T, std.c[tab.basis])
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("singular final basis") from exc
    u = np.zeros(N)
    u[tab.basis] = u_b
    if np.any(u_b < -1e-7 * (1.0 + np.abs(std.b).max(initial=0.0))):
        raise NumericalBreakdown("final basis is primal infeasible after refinement")
    u = np.maximum(u, 0.0)
    x = std.offset + std.S @ u[: std.n_std]
    dual = (y * std.flip)[: std.m0]
    obj = float(lp.objective @ x) + lp.constant
    return LpSolution(OPTIMAL, x, dual, obj, tab.iterations)


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    le = [i for i, s in enumerate(lp.senses) if s == LE]
    ge = [i for i, s in enumerate(lp.senses) if s == GE]
    eq = [i for i, s in enumerate(lp.senses) if s == EQ]
    A_ub = np.vstack([lp.A[le], -lp.A[ge]]) if le or ge else None
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]]) if le or ge else None
    A_eq = lp.A[eq] if eq else None
    b_eq = lp.rhs[eq] if eq else None
    bounds = [(None if not math.isfinite(l) else l, None if not math.isfinite(u) else u)
              for l, u in zip(lp.lower, lp.upper)]
    res = linprog(lp.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution(INFEASIBLE)
    if res.status == 3:
        return LpSolution(UNBOUNDED)
    if res.status != 0:
        raise NumericalBreakdown(res.message)
    dual = np.zeros(lp.n_rows)
    if le or ge:
        mu = res.ineqlin.marginals
        dual[le] = mu[: len(le)]
        dual[ge] = -mu[len(le):]
    if eq:
        dual[eq] = res.eqlin.marginals
    x = np.asarray(res.x)
    return LpSolution(OPTIMAL, x, dual, float(lp.objective @ x) + lp.constant, int(res.nit))


_BACKENDS = {"simplex": _solve_simplex, "highs": _solve_highs}
_default_backend = "simplex"


def set_default_backend(name: str) -> None:
    global _default_backend
    if name not in _BACKENDS:
        raise ValueError(f"unknown LP backend {name!r}")
    _default_backend = name


def get_default_backend() -> str:
    return _default_backend


def solve_lp(lp: LinearProgram, backend: str | None = None) -> LpSolution:
    """Solve ``lp``; raises :class:`MalformedProgram` on dimension errors."""
    lp.check()
    return _BACKENDS[backend or _default_backend](lp)


# --- MPS export --------------------------------------------------------------

def _num(v: float) -> str:
    """Format a float into at most 12 characters, as precisely as possible."""
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    for prec in range(12, 0, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot format {v} for MPS")


def _line(f1="", f2="", f3="", f4="", f5="", f6=""):
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def export_mps(lp: LinearProgram, name: str = "LP") -> str:
    """Fixed-format MPS text for ``lp``; the objective constant goes on the RHS."""
    lp.check()
    n, m = lp.n_vars, lp.n_rows
    cname = [f"C{j:07d}" for j in range(n)]
    rname = [f"R{i:07d}" for i in range(m)]
    kind = {LE: "L", EQ: "E", GE: "G"}
    out = [f"NAME          {name[:8]}", "ROWS", _line("N", "COST")]
    out += [_line(kind[s], rname[i]) for i, s in enumerate(lp.senses)]
    out.append("COLUMNS")
    for j in range(n):
        if lp.objective[j] != 0.0:
            out.append(_line("", cname[j], "COST", _num(lp.objective[j])))
        for i in np.flatnonzero(lp.A[:, j]):
            out.append(_line("", cname[j], rname[i], _num(lp.A[i, j])))
        if lp.objective[j] == 0.0 and not np.any(lp.A[:, j]):
            out.append(_line("", cname[j], "COST", "0"))
    out.append("RHS")
    if lp.constant != 0.0:
        out.append(_line("", "RHS", "COST", _num(-lp.constant)))
    for i in range(m):
        if lp.rhs[i] != 0.0:
            out.append(_line("", "RHS", rname[i], _num(lp.rhs[i])))
    out.append("BOUNDS")
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo == hi:
            out.append(_line("FX", "BND", cname[j], _num(lo)))
            continue
        if lo == -math.inf and hi == math.inf:
            out.append(_line("FR", "BND", cname[j]))
            continue
        if lo == -math.inf:
            out.append(_line("MI", "BND", cname[j]))
        elif lo != 0.0:
            out.append(_line("LO", "BND", cname[j], _num(lo)))
        if hi != math.inf:
            out.append(_line("UP", "BND", cname[j], _num(hi)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def read_mps(text: str) -> LinearProgram:
    """Parse MPS text (whitespace-delimited fields) back into a LinearProgram."""
    section = None
    obj_row = None
    rows, senses = [], []
    row_index = {}
    cols, col_index = [], {}
    entries = []
    rhs = {}
    bounds = {}
    rev = {"L": LE, "E": EQ, "G": GE}
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" "):
            section = raw.split()[0]
            continue
        f = raw.split()
        if section == "ROWS":
            if f[0] == "N":
                obj_row = f[1]
            else:
                row_index[f[1]] = len(rows)
                rows.append(f[1])
                senses.append(rev[f[0]])
        elif section == "COLUMNS":
            if f[0] not in col_index:
                col_index[f[0]] = len(cols)
                cols.append(f[0])
            for r, v in zip(f[1::2], f[2::2]):
                entries.append((col_index[f[0]], r, float(v)))
        elif section == "RHS":
            for r, v in zip(f[1::2], f[2::2]):
                rhs[r] = float(v)
        elif section == "BOUNDS":
            bounds.setdefault(f[2], []).append((f[0], float(f[3]) if len(f) > 3 else 0.0))
    n, m = len(cols), len(rows)
    c = np.zeros(n)
    A = np.zeros((m, n))
    for j, r, v in entries:
        if r == obj_row:
            c[j] = v
        else:
            A[row_index[r], j] = v
    b = np.array([rhs.get(r, 0.0) for r in rows])
    lo, hi = np.zeros(n), np.full(n, math.inf)
    for name, items in bounds.items():
        j = col_index[name]
        for kind, v in items:
            if kind == "UP":
                hi[j] = v
            elif kind == "LO":
                lo[j] = v
            elif kind == "FX":
                lo[j] = hi[j] = v
            elif kind == "FR":
                lo[j], hi[j] = -math.inf, math.inf
            elif kind == "MI":
                lo[j] = -math.inf
            elif kind == "PL":
                hi[j] = math.inf
    return LinearProgram(c, A, senses, b, lo, hi, constant=-rhs.get(obj_row, 0.0),
                         var_names=cols, row_names=rows)
