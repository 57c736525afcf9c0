"""Brute-force invariant checks against the extensive form.

:class:`SandwichChecker` samples states per stage, evaluates the regularized
cost-to-go exactly at each, and then checks approximation pools against those
values.  Hook it into a solve with ``on_record`` to check every iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .approx import LIPSCHITZ_TOL, eval_over, eval_under
from .model import Instance, extensive_cost_to_go, solve_extensive

SANDWICH_TOL = 1e-6


@dataclass
class Violation:
    invariant: str
    where: str
    detail: str

    def as_dict(self):
        return {"invariant": self.invariant, "where": self.where, "detail": self.detail}


@dataclass
class SandwichChecker:
    inst: Instance
    n_states: int = 50
    seed: int = 0
    tol: float = SANDWICH_TOL
    states: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    optimum: float | None = None
    violations: list = field(default_factory=list)
    checks: int = 0

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        regularized = self.inst.regularized
        for t in range(1, self.inst.T):
            lo, hi = self.inst.state_box(t)
            X = rng.uniform(lo, hi, size=(self.n_states, lo.size))
            self.states[t] = X
            self.values[t] = np.array([extensive_cost_to_go(self.inst, t, x, regularized)
                                       for x in X])
        self.optimum = solve_extensive(self.inst, regularized)[0]
        self._lb = -math.inf
        self._ub = math.inf

    def _fail(self, invariant, where, detail):
        self.violations.append(Violation(invariant, where, detail))

    def check_pools(self, pools, where="pools"):
        """Cut and envelope validity plus the slope cap, at all sampled states."""
        for t, X in self.states.items():
            under, over = pools.under[t], pools.over[t]
            m = self.inst.reg(t)
            if m is not None and len(under):
                g = float(np.max(np.abs(under.gradients)))
                if g > m + LIPSCHITZ_TOL:
                    self._fail("lipschitz", f"{where} stage {t}",
                               f"cut gradient norm {g:.17g} exceeds M={m:.17g}")
            for x, v in zip(X, self.values[t]):
                self.checks += 1
                lo = eval_under(under, x)
                if lo > v + self.tol:
                    self._fail("under-approximation", f"{where} stage {t}",
                               f"cut value {lo:.17g} above cost-to-go {v:.17g} at {x.tolist()}")
                    return False
                hi = eval_over(over, x)
                if hi < v - self.tol:
                    self._fail("over-approximation", f"{where} stage {t}",
                               f"envelope value {hi:.17g} below cost-to-go {v:.17g} at {x.tolist()}")
                    return False
        return True

    def check_bounds(self, rec):
        where = f"iteration {rec.iteration}"
        if rec.lower > self.optimum + self.tol:
            self._fail("lower-bound", where, f"{rec.lower:.17g} > optimum {self.optimum:.17g}")
        if rec.upper < self.optimum - self.tol:
            self._fail("upper-bound", where, f"{rec.upper:.17g} < optimum {self.optimum:.17g}")
        if rec.lower < self._lb - self.tol:
            self._fail("monotone-lower-bound", where, f"{rec.lower:.17g} < {self._lb:.17g}")
        if rec.upper > self._ub + self.tol:
            self._fail("monotone-upper-bound", where, f"{rec.upper:.17g} > {self._ub:.17g}")
        self._lb = max(self._lb, rec.lower)
        self._ub = min(self._ub, rec.upper)

    def new_run(self):
        """Forget the bound history so the next solve starts its own monotonicity check."""
        self._lb = -math.inf
        self._ub = math.inf

    def hook(self, pools):
        """Callback for ``on_record`` checking bounds and pools each iteration."""
        def on_record(rec):
            self.check_bounds(rec)
            self.check_pools(pools, f"iteration {rec.iteration}")
        return on_record

    @property
    def ok(self) -> bool:
        return not self.violations
