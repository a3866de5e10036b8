"""Market model with deterministic piecewise-constant coefficients, strategy
paths, and solver configuration shared by both equilibrium solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MarketError(ValueError):
    """Invalid market specification (shape, boundedness, or ellipticity)."""


@dataclass(frozen=True)
class MarketModel:
    """d risky assets over [0, horizon] with piecewise-constant mu and sigma.

    ``breakpoints[k]`` is the start of the k-th segment; the coefficients are
    right-continuous, so the values at index k apply on
    [breakpoints[k], breakpoints[k+1]).
    """

    breakpoints: np.ndarray  # (k,), starts at 0, strictly increasing, < horizon
    mu: np.ndarray  # (k, d) drift per year
    sigma: np.ndarray  # (k, d, d) volatility per sqrt(year)
    horizon: float

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 2:
            sigma = sigma[None, :, :]
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if not (np.isfinite(self.horizon) and self.horizon > 0.0):
            raise MarketError("horizon must be positive")
        if bp[0] != 0.0 or np.any(np.diff(bp) <= 0.0) or bp[-1] >= self.horizon:
            raise MarketError("breakpoints must start at 0, increase, and stay below the horizon")
        k = bp.size
        d = mu.shape[1]
        if mu.shape != (k, d) or sigma.shape != (k, d, d):
            raise MarketError("mu must be (k, d) and sigma (k, d, d)")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise MarketError("market coefficients must be finite")
        for j in range(k):
            smin = np.linalg.svd(sigma[j], compute_uv=False)[-1]
            if smin <= 1e-8:
                raise MarketError(f"sigma is singular on segment {j} (min singular value {smin:g})")

    @classmethod
    def constant(cls, mu, sigma, horizon: float) -> "MarketModel":
        """Single-segment market; scalars are promoted to d = 1."""
        mu_arr = np.atleast_1d(np.asarray(mu, dtype=float))
        sigma_arr = np.asarray(sigma, dtype=float)
        if sigma_arr.ndim == 0:
            sigma_arr = sigma_arr.reshape(1, 1)
        return cls(
            breakpoints=np.array([0.0]),
            mu=mu_arr[None, :],
            sigma=sigma_arr[None, :, :],
            horizon=horizon,
        )

    @property
    def d(self) -> int:
        return self.mu.shape[1]

    def _segment(self, t: float) -> int:
        if not 0.0 <= t <= self.horizon:
            raise MarketError(f"t={t} outside [0, {self.horizon}]")
        return max(0, int(np.searchsorted(self.breakpoints, t, side="right")) - 1)

    def mu_at(self, t: float) -> np.ndarray:
        return self.mu[self._segment(t)]

    def sigma_at(self, t: float) -> np.ndarray:
        return self.sigma[self._segment(t)]

    def price_of_risk(self, t: float) -> np.ndarray:
        """lambda(t) solving sigma(t) lambda = mu(t)."""
        j = self._segment(t)
        return np.linalg.solve(self.sigma[j], self.mu[j])

    def price_of_risk_sq_tail(self, t: float) -> float:
        """Integral of |lambda(s)|^2 over [t, horizon] (exact for piecewise-constant)."""
        total = 0.0
        edges = np.append(self.breakpoints, self.horizon)
        for j in range(self.breakpoints.size):
            lo, hi = max(edges[j], t), edges[j + 1]
            if hi > lo:
                lam = np.linalg.solve(self.sigma[j], self.mu[j])
                total += float(lam @ lam) * (hi - lo)
        return total

    def weights_from_exposure(self, t: float, a: np.ndarray) -> np.ndarray:
        """Portfolio weights pi = (sigma(t)^T)^{-1} a."""
        j = self._segment(t)
        return np.linalg.solve(self.sigma[j].T, a)


def market_price_of_risk(market: MarketModel, t: float) -> np.ndarray:
    """lambda(t) = sigma(t)^{-1} mu(t)."""
    return market.price_of_risk(t)


@dataclass
class StrategyPath:
    """Deterministic strategy on a time grid ending at the horizon.

    Per node: risk exposure ``a`` (so portfolio weights are
    (sigma^T)^{-1} a), weights ``pi``, cumulative risk ``v`` and cumulative
    return ``y`` over [t, horizon], the risk-tolerance multiplier ``m``, and
    the fixed-point residual of the equilibrium condition.
    """

    grid: np.ndarray  # (n,), increasing, grid[-1] == horizon
    a: np.ndarray  # (n, d)
    pi: np.ndarray  # (n, d)
    v: np.ndarray  # (n,)
    y: np.ndarray  # (n,)
    m: np.ndarray  # (n,)
    residual: np.ndarray = field(default=None)  # (n,) or None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        n = self.grid.size
        self.a = np.asarray(self.a, dtype=float).reshape(n, -1)
        self.pi = np.asarray(self.pi, dtype=float).reshape(n, -1)
        self.v = np.asarray(self.v, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.residual is None:
            self.residual = np.full(n, np.nan)
        else:
            self.residual = np.asarray(self.residual, dtype=float)
        if np.any(np.diff(self.grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")

    @property
    def d(self) -> int:
        return self.a.shape[1]

    def pi_at(self, t: float) -> np.ndarray:
        """Linear interpolation of the portfolio weights at time t."""
        out = np.empty(self.d)
        for j in range(self.d):
            out[j] = np.interp(t, self.grid, self.pi[:, j])
        return out

    def node_arrays(self) -> dict:
        cols = {"t": self.grid}
        for j in range(self.d):
            cols[f"a_{j + 1}"] = self.a[:, j]
        for j in range(self.d):
            cols[f"pi_{j + 1}"] = self.pi[:, j]
        cols["v"] = self.v
        cols["y"] = self.y
        cols["m"] = self.m
        cols["residual"] = self.residual
        return cols


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the backward Picard solver.

    ``refine_target`` bounds the estimated effect of trapezoid error on the
    portfolio weights; intervals are bisected until the estimate clears it.
    """

    grid_step: float = 0.01
    picard_tol: float = 1e-11
    max_picard_iters: int = 300
    window_shrink: float = 0.5
    refine_target: float = 1e-7
    max_refine_rounds: int = 12
    max_nodes: int = 40000

    def __post_init__(self):
        if self.grid_step <= 0.0:
            raise ValueError("grid_step must be positive")
        if self.picard_tol <= 0.0:
            raise ValueError("picard_tol must be positive")
        if not 0.0 < self.window_shrink < 1.0:
            raise ValueError("window_shrink must lie in (0, 1)")
        if self.max_picard_iters < 10:
            raise ValueError("max_picard_iters must be at least 10")
        if self.refine_target <= 0.0:
            raise ValueError("refine_target must be positive")


def build_grid(market: MarketModel, grid_step: float) -> np.ndarray:
    """Uniform grid over [0, horizon] refined to include every breakpoint."""
    n = max(2, int(math.ceil(market.horizon / grid_step)) + 1)
    grid = np.linspace(0.0, market.horizon, n)
    grid = np.union1d(grid, market.breakpoints)
    return np.union1d(grid, [market.horizon])
