"""Ambiguity sets over a stage's nodes and the adversary's worst case."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp_core import EQ, LE, LinearProgram, NumericalBreakdown, solve_lp

PROB_TOL = 1e-12
MEMBER_TOL = 1e-8


class DimensionMismatch(ValueError):
    pass


def _check_prob(p, name="p_hat"):
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or np.any(p < -PROB_TOL) or abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
        raise ValueError(f"{name} must be a probability vector")
    return p


@dataclass(frozen=True)
class Singleton:
    p_hat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_hat", _check_prob(self.p_hat))

    @property
    def size(self) -> int:
        return self.p_hat.size


@dataclass(frozen=True)
class FullSimplex:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("support size must be positive")

    @property
    def size(self) -> int:
        return self.n


@dataclass(frozen=True)
class WassersteinBall:
    """Distributions within transport distance ``sigma`` of ``p_hat``."""

    p_hat: np.ndarray
    dist: np.ndarray
    sigma: float

    def __post_init__(self):
        p = _check_prob(self.p_hat)
        d = np.asarray(self.dist, dtype=float)
        n = p.size
        if d.shape != (n, n):
            raise DimensionMismatch(f"distance matrix must be {n}x{n}")
        if np.any(d < 0) or not np.allclose(d, d.T, rtol=0, atol=1e-12) or np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must be symmetric, nonnegative, zero diagonal")
        if not self.sigma >= 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "p_hat", p)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def size(self) -> int:
        return self.p_hat.size

    @classmethod
    def relative(cls, p_hat, dist, beta):
        """Radius set to ``beta`` times the sum of all pairwise distances."""
        dist = np.asarray(dist, dtype=float)
        return cls(p_hat, dist, beta * float(dist.sum()))


AmbiguitySet = Singleton | FullSimplex | WassersteinBall


@dataclass(frozen=True)
class WorstCase:
    p_star: np.ndarray
    value: float


def _transport_lp(p_hat, dist, objective_p, sigma=None, p_fixed=None):
    """LP over (p, u) with u a transport plan from p to p_hat.

    Columns are ``p`` (n) followed by ``u`` (n*n, row-major: u[m, k] moves
    mass of node m in p to node k in p_hat).
    """
    n = p_hat.size
    nv = n + n * n
    rows_A, senses, rhs = [], [], []
    for m in range(n):  # sum_k u[m,k] = p_m
        a = np.zeros(nv)
        a[m] = -1.0
        a[n + m * n: n + (m + 1) * n] = 1.0
        rows_A.append(a), senses.append(EQ), rhs.append(0.0)
    for k in range(n):  # sum_m u[m,k] = p_hat_k
        a = np.zeros(nv)
        a[n + k: nv: n] = 1.0
        rows_A.append(a), senses.append(EQ), rhs.append(p_hat[k])
    c = np.zeros(nv)
    if sigma is not None:
        a = np.zeros(nv)
        a[n:] = dist.reshape(-1)
        rows_A.append(a), senses.append(LE), rhs.append(sigma)
    if objective_p is not None:
        c[:n] = objective_p
    else:
        c[n:] = dist.reshape(-1)
    lo = np.zeros(nv)
    hi = np.full(nv, np.inf)
    if p_fixed is not None:
        lo[:n] = hi[:n] = p_fixed
    return LinearProgram(c, np.array(rows_A), senses, rhs, lo, hi)


def worst_case_distribution(amb: AmbiguitySet, v) -> WorstCase:
    """Maximize ``p @ v`` over the ambiguity set.

    Ties resolve to the lowest node index for the simplex; the Wasserstein
    case inherits the deterministic pivot order of the LP solver.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != amb.size:
        raise DimensionMismatch(f"value vector has length {v.size}, support is {amb.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("value vector must be finite")
    if isinstance(amb, Singleton):
        return WorstCase(amb.p_hat.copy(), float(amb.p_hat @ v))
    if isinstance(amb, FullSimplex):
        p = np.zeros(amb.n)
        p[int(np.argmax(v))] = 1.0
        return WorstCase(p, float(v.max()))
    sol = solve_lp(_transport_lp(amb.p_hat, amb.dist, -v, sigma=amb.sigma))
    if not sol.optimal:
        raise NumericalBreakdown(f"worst-case LP returned {sol.status}")
    p = np.clip(sol.primal[: amb.size], 0.0, None)
    p = p / p.sum()
    return WorstCase(p, float(p @ v))


def wasserstein_distance(p, q, dist) -> float:
    """Optimal transport cost between ``p`` and ``q`` under ``dist``."""
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    dist = np.asarray(dist, dtype=float)
    if p.size != q.size or dist.shape != (p.size, p.size):
        raise DimensionMismatch("distributions and distance matrix disagree in size")
    sol = solve_lp(_transport_lp(q, dist, None, p_fixed=p))
    if not sol.optimal:
        raise NumericalBreakdown(f"transport LP returned {sol.status}")
    return max(0.0, sol.objective_value)


def membership(amb: AmbiguitySet, p) -> bool:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != amb.size:
        raise DimensionMismatch("length mismatch")
    if np.any(p < -MEMBER_TOL) or abs(p.sum() - 1.0) > MEMBER_TOL:
        return False
    if isinstance(amb, FullSimplex):
        return True
    if isinstance(amb, Singleton):
        return bool(np.all(np.abs(p - amb.p_hat) <= MEMBER_TOL))
    return wasserstein_distance(p, amb.p_hat, amb.dist) <= amb.sigma + MEMBER_TOL


def to_json(amb: AmbiguitySet) -> dict:
    if isinstance(amb, Singleton):
        return {"kind": "singleton", "p_hat": amb.p_hat.tolist()}
    if isinstance(amb, FullSimplex):
        return {"kind": "simplex", "n": amb.n}
    return {"kind": "wasserstein", "p_hat": amb.p_hat.tolist(),
            "dist": amb.dist.tolist(), "sigma": amb.sigma}


def from_json(d: dict) -> AmbiguitySet:
    kind = d["kind"]
    if kind == "singleton":
        return Singleton(np.array(d["p_hat"], dtype=float))
    if kind == "simplex":
        return FullSimplex(int(d["n"]))
    if kind == "wasserstein":
        p = np.array(d["p_hat"], dtype=float)
        dist = np.array(d["dist"], dtype=float)
        if "sigma" in d:
            return WassersteinBall(p, dist, float(d["sigma"]))
        return WassersteinBall.relative(p, dist, float(d["beta"]))
    raise ValueError(f"unknown ambiguity kind {kind!r}")
