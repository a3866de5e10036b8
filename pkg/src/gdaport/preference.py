"""Utilities, GDA parameters, outcome distributions, and certainty equivalents.

The GDA value eta of an outcome Y solves

    U(eta) = E[U(Y)] - beta * E[(U(delta * eta) - U(Y))_+],

a strictly monotone fixed point with a unique positive root.  For
delta <= 1 the value of a sure outcome is the outcome itself and eta is
already the certainty equivalent; for delta > 1 a sure outcome w is valued
at sure_value(w) < w, and the certainty equivalent is recovered by the
inverse map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .numerics import (
    BracketError,
    RootBracket,
    find_root,
    invert_monotone,
    lognormal_expect,
)

_PROBE_WEALTH = np.geomspace(1e-6, 1e6, 25)


@dataclass(frozen=True)
class Utility:
    """Strictly increasing utility with optional higher derivatives.

    ``u`` and the derivative callables must accept numpy arrays.  ``regularity``
    declares how many derivatives exist and satisfy a polynomial growth bound
    C*(w**growth + w**-growth); the surface gradients need ``d1``/``d2`` and the
    optional risk-tolerance cross-checks need ``d3``.
    """

    u: Callable
    d1: Callable
    d2: Callable | None = None
    d3: Callable | None = None
    inverse: Callable | None = None
    regularity: int = 1
    growth: float = 3.0
    rho: float | None = None
    description: str = ""

    def __post_init__(self):
        vals = np.asarray(self.u(_PROBE_WEALTH), dtype=float)
        slopes = np.asarray(self.d1(_PROBE_WEALTH), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("utility must be finite on (1e-6, 1e6)")
        if not np.all(slopes > 0.0):
            raise ValueError("marginal utility must be positive on (1e-6, 1e6)")
        for order, fn in ((2, self.d2), (3, self.d3)):
            if self.regularity >= order and fn is not None:
                dv = np.asarray(fn(_PROBE_WEALTH), dtype=float)
                if not np.all(np.isfinite(dv)):
                    raise ValueError(f"derivative of order {order} must be finite")

    @classmethod
    def crra(cls, rho: float) -> "Utility":
        """Constant-relative-risk-aversion utility w**(1-rho)/(1-rho), log at rho=1."""
        if rho <= 0.0:
            raise ValueError("rho must be positive")
        if rho == 1.0:
            u = np.log
            inv = np.exp
        else:
            s = 1.0 - rho

            def u(w, s=s):
                return np.power(w, s) / s

            def inv(t, s=s):
                return np.power(s * t, 1.0 / s)

        def d1(w, r=rho):
            return np.power(w, -r)

        def d2(w, r=rho):
            return -r * np.power(w, -r - 1.0)

        def d3(w, r=rho):
            return r * (r + 1.0) * np.power(w, -r - 2.0)

        return cls(
            u=u,
            d1=d1,
            d2=d2,
            d3=d3,
            inverse=inv,
            regularity=3,
            growth=rho + 2.0,
            rho=rho,
            description=f"CRRA(rho={rho:g})",
        )

    @property
    def is_crra(self) -> bool:
        return self.rho is not None

    def invert(self, target: float) -> float:
        """w with U(w) = target."""
        if self.inverse is not None:
            return float(self.inverse(target))
        lo = 1.0
        n = 0
        while float(self.u(lo)) > target:
            lo *= 0.5
            n += 1
            if n > 600:
                raise BracketError("could not bracket the utility inverse from below")
        return invert_monotone(lambda w: float(self.u(w)), target, lo, 2.0 * lo, tol=1e-12)


@dataclass(frozen=True)
class GdaParams:
    """Disappointment weight beta >= 0 and benchmark adjustment delta > 0."""

    beta: float
    delta: float

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta >= 0.0):
            raise ValueError("beta must be finite and nonnegative")
        if not (np.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError("delta must be finite and positive")

    @property
    def is_expected_utility(self) -> bool:
        return self.beta == 0.0


@dataclass(frozen=True)
class LogNormal:
    """LogNormal(mean_log, var_log) law of a strictly positive outcome."""

    mean_log: float
    var_log: float

    def __post_init__(self):
        if not (np.isfinite(self.mean_log) and np.isfinite(self.var_log)):
            raise ValueError("lognormal parameters must be finite")
        if self.var_log < 0.0:
            raise ValueError("var_log must be nonnegative")

    @property
    def sd_log(self) -> float:
        return math.sqrt(self.var_log)

    def is_degenerate(self) -> bool:
        return self.var_log == 0.0


@dataclass(frozen=True)
class Empirical:
    """Finite distribution on strictly positive outcomes."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        pr = np.asarray(self.probs, dtype=float)
        if vals.shape != pr.shape or vals.ndim != 1 or vals.size == 0:
            raise ValueError("values and probs must be matching non-empty 1-D sequences")
        if np.any(vals <= 0.0):
            raise ValueError("outcome values must be strictly positive")
        if np.any(pr < 0.0):
            raise ValueError("probabilities must be nonnegative")
        if abs(pr.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))
        object.__setattr__(self, "probs", tuple(float(p) for p in pr))

    def is_degenerate(self) -> bool:
        live = [v for v, p in zip(self.values, self.probs) if p > 0.0]
        return len(set(live)) == 1


OutcomeDistribution = Union[LogNormal, Empirical]


def _degenerate_outcome(dist: OutcomeDistribution) -> float | None:
    if isinstance(dist, LogNormal):
        return math.exp(dist.mean_log) if dist.is_degenerate() else None
    if dist.is_degenerate():
        return next(v for v, p in zip(dist.values, dist.probs) if p > 0.0)
    return None


def _expect(dist: OutcomeDistribution, f: Callable) -> float:
    if isinstance(dist, LogNormal):
        x = dist.sd_log
        y = dist.mean_log + dist.var_log / 2.0
        return lognormal_expect(f, x, y)
    vals = np.asarray(dist.values)
    return float(np.asarray(dist.probs) @ np.asarray(f(vals), dtype=float))


def _expect_below(dist: OutcomeDistribution, f: Callable, threshold: float) -> float:
    """E[f(Y) 1{Y < threshold}] by exact sum (Empirical) or quadrature."""
    if isinstance(dist, Empirical):
        vals = np.asarray(dist.values)
        mask = vals < threshold
        if not mask.any():
            return 0.0
        pr = np.asarray(dist.probs)[mask]
        return float(pr @ np.asarray(f(vals[mask]), dtype=float))
    if threshold <= 0.0:
        return 0.0
    x = dist.sd_log
    y = dist.mean_log + dist.var_log / 2.0
    if x == 0.0:
        return float(f(math.exp(dist.mean_log))) if dist.mean_log < math.log(threshold) else 0.0
    a = (math.log(threshold) - dist.mean_log) / x
    return lognormal_expect(f, x, y, restrict_below=a)


def gda_value(
    utility: Utility,
    params: GdaParams,
    dist: OutcomeDistribution,
    tol: float = 1e-11,
) -> float:
    """The unique eta > 0 with U(eta) = E[U(Y)] - beta E[(U(delta eta) - U(Y))_+]."""
    w0 = _degenerate_outcome(dist)
    if w0 is not None:
        return w0 if params.delta <= 1.0 else sure_value(utility, params, w0)
    eu = _expect(dist, utility.u)
    eta_eu = utility.invert(eu)
    if params.beta == 0.0:
        return eta_eu

    beta, delta = params.beta, params.delta

    def residual(p: float) -> float:
        bench = delta * p
        shortfall = utility.u(bench) * _prob_below(dist, bench) - _expect_below(
            dist, utility.u, bench
        )
        return float(utility.u(p)) - eu + beta * shortfall

    # the penalty is nonnegative, so eta <= EU certainty equivalent; expand a
    # lower endpoint geometrically until the residual changes sign
    hi = eta_eu
    f_hi = residual(hi)
    if f_hi < 0.0:  # guard against rounding at the top end
        hi *= 1.0 + 1e-9
        f_hi = residual(hi)
    lo = hi
    f_lo = f_hi
    n = 0
    while f_lo > 0.0:
        n += 1
        if n > 200:
            raise BracketError("could not bracket the GDA value from below")
        lo *= 0.5
        f_lo = residual(lo)
    if f_lo == 0.0:
        return lo
    root = find_root(residual, RootBracket(lo, hi, f_lo, f_hi), tol=tol * (1.0 + abs(eu)))
    return root


def _prob_below(dist: OutcomeDistribution, threshold: float) -> float:
    if isinstance(dist, Empirical):
        vals = np.asarray(dist.values)
        return float(np.asarray(dist.probs)[vals < threshold].sum())
    if threshold <= 0.0:
        return 0.0
    if dist.var_log == 0.0:
        return 1.0 if dist.mean_log < math.log(threshold) else 0.0
    from .numerics import std_normal_cdf

    return std_normal_cdf((math.log(threshold) - dist.mean_log) / dist.sd_log)


def sure_value(utility: Utility, params: GdaParams, w: float) -> float:
    """GDA value of the riskless outcome w when delta > 1 (strictly below w).

    Solves U(s) + beta U(delta s) = (1 + beta) U(w).
    """
    if params.delta <= 1.0:
        raise ValueError("sure_value is only defined for delta > 1")
    if w <= 0.0:
        raise ValueError("w must be positive")
    if params.beta == 0.0:
        return w
    beta, delta = params.beta, params.delta
    target = (1.0 + beta) * float(utility.u(w))

    def f(s: float) -> float:
        return float(utility.u(s)) + beta * float(utility.u(delta * s)) - target

    bracket = RootBracket.from_function(f, w / delta, w)
    return find_root(f, bracket, tol=1e-13 * (1.0 + abs(target)))


def sure_value_inverse(utility: Utility, params: GdaParams, w: float) -> float:
    """Inverse of sure_value: U^{-1}((U(w) + beta U(delta w)) / (1 + beta))."""
    if params.delta <= 1.0:
        raise ValueError("sure_value_inverse is only defined for delta > 1")
    if w <= 0.0:
        raise ValueError("w must be positive")
    beta, delta = params.beta, params.delta
    blended = (float(utility.u(w)) + beta * float(utility.u(delta * w))) / (1.0 + beta)
    return utility.invert(blended)


def certainty_equivalent(
    utility: Utility,
    params: GdaParams,
    dist: OutcomeDistribution,
    tol: float = 1e-11,
) -> float:
    """The sure outcome indifferent to the distribution.

    Coincides with the GDA value for delta <= 1; for delta > 1 the value of a
    sure outcome is not the outcome itself and the inverse map is applied.
    """
    eta = gda_value(utility, params, dist, tol=tol)
    if params.delta <= 1.0:
        return eta
    return sure_value_inverse(utility, params, eta)
