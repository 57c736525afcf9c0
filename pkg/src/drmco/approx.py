"""Under- and over-approximations of regularized cost-to-go functions.

A :class:`CutPool` is the pointwise maximum of a floor (0 by default) and
affine cuts.  An :class:`EnvelopePool` is the convex hull of the cones
``v_j + M * ||x - x_j||_1``; with ``lipschitz = inf`` it degenerates to the
convex hull of the anchor values themselves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .ambiguity import DimensionMismatch
from .lp_core import EQ, GE, LinearProgram, NumericalBreakdown, solve_lp

LIPSCHITZ_TOL = 1e-9


class LipschitzViolation(ValueError):
    pass


@dataclass
class Cut:
    anchor: np.ndarray
    value_at_anchor: float
    gradient: np.ndarray

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float).reshape(-1)
        self.gradient = np.asarray(self.gradient, dtype=float).reshape(-1)
        self.value_at_anchor = float(self.value_at_anchor)

    def __call__(self, x) -> float:
        return float(self.value_at_anchor + self.gradient @ (np.asarray(x, dtype=float) - self.anchor))

    @property
    def intercept(self) -> float:
        """Constant term when the cut is written ``intercept + gradient @ x``."""
        return float(self.value_at_anchor - self.gradient @ self.anchor)


@dataclass
class EnvelopePoint:
    anchor: np.ndarray
    value: float

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float).reshape(-1)
        self.value = float(self.value)


@dataclass
class CutPool:
    stage: int
    dim: int
    lipschitz: float | None = None  # gradient cap; None disables the check
    floor: float | None = 0.0
    cuts: list = field(default_factory=list)

    def __post_init__(self):
        self._G = np.zeros((0, self.dim))
        self._b = np.zeros(0)
        for c in list(self.cuts):
            self._append(c)

    def _append(self, cut):
        self._G = np.vstack([self._G, cut.gradient[None, :]])
        self._b = np.append(self._b, cut.intercept)

    def __len__(self):
        return len(self.cuts)

    @property
    def gradients(self) -> np.ndarray:
        return self._G

    @property
    def intercepts(self) -> np.ndarray:
        return self._b


@dataclass
class EnvelopePool:
    stage: int
    dim: int
    lipschitz: float  # math.inf for the plain convex hull
    points: list = field(default_factory=list)

    def __post_init__(self):
        self._X = np.zeros((0, self.dim))
        self._v = np.zeros(0)
        self._cache = {}
        for p in list(self.points):
            self._X = np.vstack([self._X, p.anchor[None, :]])
            self._v = np.append(self._v, p.value)

    def __len__(self):
        return len(self.points)

    @property
    def anchors(self) -> np.ndarray:
        return self._X

    @property
    def values(self) -> np.ndarray:
        return self._v


def _check_dim(x, dim):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != dim:
        raise DimensionMismatch(f"state has dimension {x.size}, pool expects {dim}")
    return x


def eval_under(pool: CutPool, x) -> float:
    x = _check_dim(x, pool.dim)
    best = -math.inf if pool.floor is None else pool.floor
    if pool.cuts:
        best = max(best, float(np.max(pool._b + pool._G @ x)))
    return best


def add_cut(pool: CutPool, cut: Cut) -> CutPool:
    if cut.gradient.size != pool.dim or cut.anchor.size != pool.dim:
        raise DimensionMismatch("cut dimension does not match pool")
    if pool.lipschitz is not None:
        g = float(np.max(np.abs(cut.gradient), initial=0.0))
        if g > pool.lipschitz + LIPSCHITZ_TOL:
            raise LipschitzViolation(
                f"cut gradient norm {g:.12g} exceeds M={pool.lipschitz:.12g} at stage {pool.stage}")
    pool.cuts.append(cut)
    pool._append(cut)
    return pool


def envelope_rows(pool: EnvelopePool, cols_x, n_total):
    """Columns and rows that put the envelope value of ``x`` into an LP objective.

    Returns ``(extra, rows)``: ``extra`` lists new columns as ``(cost, lo, hi)``
    appended after ``n_total`` existing ones, and ``rows`` holds
    ``(coef dict, sense, rhs)`` linking them to the state columns ``cols_x``.
    The added objective terms are ``values @ mu + M * sum(s)``.
    """
    J, d = len(pool.points), pool.dim
    extra = [(v, 0.0, math.inf) for v in pool._v]
    mu = list(range(n_total, n_total + J))
    rows = [({j: 1.0 for j in mu}, EQ, 1.0)]
    if math.isinf(pool.lipschitz):
        for i in range(d):
            coefs = {int(cols_x[i]): 1.0}
            for k, j in enumerate(mu):
                if pool._X[k, i] != 0.0:
                    coefs[j] = -pool._X[k, i]
            rows.append((coefs, EQ, 0.0))
        return extra, rows
    s = list(range(n_total + J, n_total + J + d))
    extra += [(pool.lipschitz, 0.0, math.inf)] * d
    for i in range(d):
        # s_i >= x_i - X_i mu  and  s_i >= X_i mu - x_i
        up = {s[i]: 1.0, int(cols_x[i]): -1.0}
        dn = {s[i]: 1.0, int(cols_x[i]): 1.0}
        for k, j in enumerate(mu):
            a = pool._X[k, i]
            if a != 0.0:
                up[j] = a
                dn[j] = -a
        rows.append((up, GE, 0.0))
        rows.append((dn, GE, 0.0))
    return extra, rows


def eval_over(pool: EnvelopePool, x) -> float:
    """Envelope value at ``x``: ``min_mu values @ mu + M ||x - anchors^T mu||_1``.

    Cheaper than (and equal to) the per-cone transport form: by the triangle
    inequality all cone displacements can be taken equal.
    """
    x = _check_dim(x, pool.dim)
    if not pool.points:
        return math.inf
    key = x.tobytes()
    hit = pool._cache.get(key)
    if hit is not None:
        return hit
    d = pool.dim
    extra, rows = envelope_rows(pool, np.arange(d), d)
    n = d + len(extra)
    c = np.zeros(n)
    lo = np.empty(n)
    hi = np.empty(n)
    lo[:d] = hi[:d] = x
    for k, (cost, l, h) in enumerate(extra):
        c[d + k], lo[d + k], hi[d + k] = cost, l, h
    A = np.zeros((len(rows), n))
    for r, (coefs, _, _) in enumerate(rows):
        for j, v in coefs.items():
            A[r, j] = v
    sol = solve_lp(LinearProgram(c, A, [r[1] for r in rows], [r[2] for r in rows], lo, hi))
    if sol.status == "Infeasible":
        val = math.inf  # outside the hull of the anchors (infinite Lipschitz constant)
    elif not sol.optimal:
        raise NumericalBreakdown(f"envelope LP returned {sol.status}")
    else:
        val = sol.objective_value
    if len(pool._cache) < 100_000:
        pool._cache[key] = val
    return val


def add_envelope_point(pool: EnvelopePool, pt: EnvelopePoint) -> EnvelopePool:
    if pt.anchor.size != pool.dim:
        raise DimensionMismatch("point dimension does not match pool")
    if not math.isfinite(pt.value):
        return pool  # a cone at +inf does not change the hull
    pool.points.append(pt)
    pool._X = np.vstack([pool._X, pt.anchor[None, :]])
    pool._v = np.append(pool._v, pt.value)
    pool._cache.clear()
    return pool


# --- warm-start files --------------------------------------------------------------

def pools_to_json(under: dict, over: dict) -> dict:
    """Serialize per-stage pools (dicts keyed by stage) to plain JSON data."""
    return {
        "cuts": {str(t): [{"anchor": c.anchor.tolist(), "value": c.value_at_anchor,
                           "gradient": c.gradient.tolist()} for c in p.cuts]
                 for t, p in under.items()},
        "points": {str(t): [{"anchor": q.anchor.tolist(), "value": q.value} for q in p.points]
                   for t, p in over.items()},
    }


def load_pools_json(data: dict, under: dict, over: dict, check_lipschitz: bool = True) -> None:
    """Append serialized cuts and points to existing pools."""
    for t, cuts in data.get("cuts", {}).items():
        pool = under[int(t)]
        for c in cuts:
            cut = Cut(c["anchor"], c["value"], c["gradient"])
            if check_lipschitz:
                add_cut(pool, cut)
            else:
                pool.cuts.append(cut)
                pool._append(cut)
    for t, pts in data.get("points", {}).items():
        for q in pts:
            add_envelope_point(over[int(t)], EnvelopePoint(q["anchor"], q["value"]))


def dumps_pools(under: dict, over: dict) -> str:
    return json.dumps(pools_to_json(under, over), indent=1)
