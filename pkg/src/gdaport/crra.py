"""Semi-analytic equilibrium pipeline for CRRA utilities (delta != 1).

CRRA homogeneity makes the value of a LogNormal(0, x^2) outcome a function
of x alone, solvable from a scalar equation; the risk-tolerance multiplier
m(x) follows in closed form up to that solve.  The equilibrium cumulative
risk then separates:

    risk_budget(v) = integral_0^v m(sqrt(w))^-2 dw

maps cumulative variance to the squared market-price-of-risk budget that
sustains it, so v(t) inverts the budget of the remaining horizon and

    a(t) = m(sqrt(v(t))) * lambda(t).

The horizon-dependent extension replaces rho by an increasing rho(t); the
separable shortcut no longer applies and the shared backward Picard engine
takes over with m(t, x) evaluated at the decision-time risk aversion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as kernels
from .equilibrium import solve_fixed_point
from .market import MarketModel, SolverConfig, StrategyPath, build_grid
from .numerics import find_root, integrate_1d, invert_monotone, RootBracket
from .preference import GdaParams, Utility

DELTA_ONE_GUARD = 1e-6


@dataclass(frozen=True)
class CrraSpec:
    """CRRA exponent plus GDA parameters; delta = 1 has no interior solution."""

    rho: float
    beta: float
    delta: float

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError("rho must be positive")
        if self.beta < 0.0:
            raise ValueError("beta must be nonnegative")
        if self.delta <= 0.0 or self.delta == 1.0:
            raise ValueError(
                "delta must be positive and != 1 (delta = 1 gives the "
                "non-participation equilibrium)"
            )
        if abs(self.delta - 1.0) < DELTA_ONE_GUARD:
            warnings.warn("delta within 1e-6 of 1: expect ill-conditioning", stacklevel=2)

    def utility(self) -> Utility:
        return Utility.crra(self.rho)

    def params(self) -> GdaParams:
        return GdaParams(self.beta, self.delta)


@dataclass(frozen=True)
class HdraSpec:
    """Horizon-dependent risk aversion: increasing continuous rho(t) > 0."""

    rho_fn: Callable[[float], float]
    description: str = ""

    @classmethod
    def affine(cls, intercept: float = 1.0, slope: float = 0.0) -> "HdraSpec":
        if intercept <= 0.0 or slope < 0.0:
            raise ValueError("need intercept > 0 and slope >= 0")
        return cls(
            rho_fn=lambda t: intercept + slope * t,
            description=f"rho(t) = {intercept:g} + {slope:g} t",
        )

    def validate_on(self, grid: np.ndarray) -> np.ndarray:
        rho = np.array([float(self.rho_fn(t)) for t in grid])
        if not np.all(rho > 0.0):
            raise ValueError("rho(t) must stay positive")
        if np.any(np.diff(rho) < -1e-12):
            raise ValueError("rho(t) must be nondecreasing")
        return rho


def log_benchmark_offset(spec: CrraSpec, x: float) -> float:
    """The z with delta * value(x^2, y) = exp(y - x^2/2 + z).

    CRRA homogeneity makes z independent of the cumulative return y, so it
    solves a scalar equation in x alone; the x = 0 boundary value is closed
    form.
    """
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    return kernels.crra_log_benchmark(spec.rho, spec.beta, spec.delta, x)


def value(spec: CrraSpec, x: float) -> float:
    """GDA value of a LogNormal(-x^2/2, x^2) gross return (zero cumulative
    return, cumulative risk x^2); matches the general surface at (x^2, 0)."""
    return math.exp(log_benchmark_offset(spec, x) - 0.5 * x * x) / spec.delta


def risk_tolerance(spec: CrraSpec, x: float) -> float:
    """m(x): equals 1/rho at x = 0 and under beta = 0, below it otherwise."""
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    return kernels.crra_risk_tolerance(spec.rho, spec.beta, spec.delta, x)


def risk_budget(spec: CrraSpec, v: float, tol: float = 1e-12) -> float:
    """integral_0^v m(sqrt(w))^-2 dw: strictly increasing, >= rho^2 v."""
    if v < 0.0:
        raise ValueError("v must be nonnegative")
    if v == 0.0:
        return 0.0
    return integrate_1d(
        lambda w: kernels.crra_inv_sq_tolerance_many(spec.rho, spec.beta, spec.delta, w),
        0.0,
        v,
        tol=tol,
    )


def variance_from_risk_budget(spec: CrraSpec, budget: float, tol: float = 1e-11) -> float:
    """Inverse of risk_budget; m <= 1/rho pins the bracket at budget/rho^2."""
    if budget < 0.0:
        raise ValueError("budget must be nonnegative")
    if budget == 0.0:
        return 0.0
    hint = budget / (spec.rho * spec.rho)
    return invert_monotone(lambda v: risk_budget(spec, v), budget, 0.0, hint, tol=tol)


class _BudgetTable:
    """Backward accumulation of the budget and return integrals.

    Queries must come with nondecreasing budgets (the natural order when
    sweeping the grid from the horizon toward time 0), so each inversion
    only integrates over the increment since the last anchor.
    """

    def __init__(self, spec: CrraSpec):
        self.spec = spec
        self.v = 0.0
        self.budget = 0.0
        self.y = 0.0

    def advance_to(self, budget: float) -> tuple[float, float]:
        spec = self.spec
        if budget < self.budget - 1e-12:
            raise ValueError("budget queries must be nondecreasing")
        inc = budget - self.budget
        if inc <= 0.0:
            return self.v, self.y
        dv_max = inc / (spec.rho * spec.rho) * (1.0 + 1e-10) + 1e-300

        def f(vv: float) -> float:
            return (
                integrate_1d(
                    lambda w: kernels.crra_inv_sq_tolerance_many(
                        spec.rho, spec.beta, spec.delta, w
                    ),
                    self.v,
                    vv,
                    tol=1e-13,
                )
                - inc
            )

        lo, hi = self.v, self.v + dv_max
        f_lo, f_hi = -inc, f(hi)
        if f_hi < 0.0:  # rounding slack
            hi += 1e-12 * (1.0 + hi)
            f_hi = f(hi)
        v_new = find_root(f, RootBracket(lo, hi, f_lo, f_hi), tol=1e-13 * (1.0 + inc))
        # dy/dv = 1/m along the equilibrium, and 1/m = sqrt(m^-2)
        self.y += integrate_1d(
            lambda w: np.sqrt(
                kernels.crra_inv_sq_tolerance_many(spec.rho, spec.beta, spec.delta, w)
            ),
            self.v,
            v_new,
            tol=1e-13,
        )
        self.v = v_new
        self.budget = budget
        return self.v, self.y


def equilibrium_path(
    spec: CrraSpec,
    market: MarketModel,
    grid=None,
    grid_step: float = 0.01,
) -> StrategyPath:
    """Unique equilibrium for a CRRA preference by budget inversion."""
    if grid is None:
        grid = build_grid(market, grid_step)
    else:
        grid = np.union1d(np.asarray(grid, dtype=float), [market.horizon])
    n = grid.size
    budgets = np.array([market.price_of_risk_sq_tail(t) for t in grid])
    table = _BudgetTable(spec)
    v = np.empty(n)
    y = np.empty(n)
    for i in range(n - 1, -1, -1):  # budgets grow toward time 0
        v[i], y[i] = table.advance_to(budgets[i])
    m_vals = kernels.crra_risk_tolerance_many(spec.rho, spec.beta, spec.delta, np.sqrt(v))
    lam = np.array([market.price_of_risk(t) for t in grid])
    a = m_vals[:, None] * lam
    pi = np.array([market.weights_from_exposure(grid[i], a[i]) for i in range(n)])
    return StrategyPath(
        grid=grid, a=a, pi=pi, v=v, y=y, m=m_vals, residual=np.zeros(n)
    )


def hdra_equilibrium_path(
    hdra: HdraSpec,
    params: GdaParams,
    market: MarketModel,
    cfg: SolverConfig | None = None,
) -> StrategyPath:
    """Equilibrium with horizon-dependent risk aversion rho(t).

    The preference applies the decision-time coefficient rho(t) to the whole
    remaining horizon, so the risk-tolerance multiplier is the CRRA one with
    rho frozen at t; the backward Picard engine solves the coupled path.
    """
    if params.delta == 1.0:
        raise ValueError("delta = 1 is non-participation; no HDRA solve needed")
    cfg = cfg or SolverConfig()
    grid = build_grid(market, cfg.grid_step)
    rho_on_grid = hdra.validate_on(grid)
    bound = 1.0 / float(rho_on_grid.min())

    beta, delta = params.beta, params.delta
    rho_fn = hdra.rho_fn

    def m_of(t, x, y):
        return kernels.crra_risk_tolerance(float(rho_fn(t)), beta, delta, x)

    # empirical boundedness probe over the reachable box (the CRRA bound
    # m <= 1/rho(t) should hold; warn loudly if the samples disagree)
    lam_max = max(float(np.linalg.norm(market.price_of_risk(t))) for t in grid)
    x_max = max(bound * lam_max * math.sqrt(market.horizon), 1e-3)
    xs = np.linspace(0.0, x_max, 24)
    samples = np.array(
        [
            kernels.crra_risk_tolerance_many(float(r), beta, delta, xs)
            for r in (rho_on_grid[0], rho_on_grid[-1])
        ]
    )
    if float(samples.max()) > bound * (1.0 + 1e-9):
        warnings.warn("risk tolerance exceeded its nominal bound; check rho(t)", stacklevel=2)
    lip = max(
        float(np.abs(np.diff(samples, axis=1)).max() / (xs[1] - xs[0])), 1e-6
    )
    return solve_fixed_point(market, grid, m_of, cfg, bound, lip)
