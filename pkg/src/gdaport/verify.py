"""Independent validation: Monte-Carlo value oracle, wealth simulation, and
the spike-perturbation test of the equilibrium property.

The Monte-Carlo oracle re-solves the value fixed point with sample-average
expectations, giving a check on the quadrature path that shares no code
with it.  Wealth simulation draws the exact per-interval lognormal law of a
deterministic strategy, so discretization adds no bias and agreement is a
purely statistical question.  The spike test perturbs a strategy on
[t, t + eps) and inspects the leading order of the value change: at an
equilibrium the first-order coefficient is nonpositive for every spike
direction; under pure disappointment aversion the zero path degrades like
sqrt(eps) with the small-risk slope constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .market import MarketModel, StrategyPath
from .numerics import RootBracket, find_root
from .preference import GdaParams, LogNormal, Utility
from .surface import ValueSurface, da_small_risk_slope


@dataclass(frozen=True)
class McConfig:
    """Seeded Monte-Carlo sizing; oracle-grade runs want n_paths >= 10**4."""

    n_paths: int
    seed: int
    n_steps: int = 1
    n_batches: int = 20

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be positive")
        if not 2 <= self.n_batches <= self.n_paths:
            raise ValueError("n_batches must be in [2, n_paths]")


@dataclass(frozen=True)
class PerturbationSpec:
    """Spike direction k applied on [t, t + eps) for each eps in epsilons."""

    t: float
    k: tuple
    epsilons: tuple = (1e-2, 1e-4, 1e-6)

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.k, dtype=float))
        object.__setattr__(self, "k", tuple(float(v) for v in k))
        eps = tuple(float(e) for e in self.epsilons)
        if any(e <= 0.0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be positive and decreasing")
        if not np.all(np.isfinite(k)):
            raise ValueError("k must be finite")
        object.__setattr__(self, "epsilons", eps)


def mc_gda_value(
    utility: Utility,
    params: GdaParams,
    dist: LogNormal,
    mc: McConfig,
) -> tuple[float, float]:
    """Monte-Carlo fixed point of the value equation, with a batch std error.

    Draws are split over independent child streams of the seed, so the
    estimate is reproducible and the batches are exchangeable; the standard
    error comes from re-solving the fixed point per batch.
    """
    if dist.var_log == 0.0:
        w = math.exp(dist.mean_log)
        val = w if params.delta <= 1.0 else _sure(utility, params, w)
        return val, 0.0
    streams = np.random.SeedSequence(mc.seed).spawn(mc.n_batches)
    per = mc.n_paths // mc.n_batches
    counts = [per + (1 if i < mc.n_paths % mc.n_batches else 0) for i in range(mc.n_batches)]
    batches = [
        np.asarray(
            utility.u(
                np.exp(
                    dist.mean_log
                    + dist.sd_log * np.random.default_rng(s).standard_normal(c)
                )
            ),
            dtype=float,
        )
        for s, c in zip(streams, counts)
    ]
    pooled = np.concatenate(batches)
    estimate = _empirical_fixed_point(utility, params, pooled)
    if mc.n_batches < 2:
        return estimate, float("nan")
    per_batch = [_empirical_fixed_point(utility, params, b) for b in batches]
    std_err = float(np.std(per_batch, ddof=1) / math.sqrt(len(per_batch)))
    return estimate, std_err


def _sure(utility, params, w):
    from .preference import sure_value

    return sure_value(utility, params, w)


def _empirical_fixed_point(utility: Utility, params: GdaParams, u_samples: np.ndarray) -> float:
    beta, delta = params.beta, params.delta
    mean_u = float(u_samples.mean())
    eta_eu = utility.invert(mean_u)
    if beta == 0.0:
        return eta_eu

    def residual(p: float) -> float:
        short = np.maximum(float(utility.u(delta * p)) - u_samples, 0.0)
        return float(utility.u(p)) - mean_u + beta * float(short.mean())

    hi = eta_eu
    f_hi = residual(hi)
    while f_hi < 0.0:
        hi *= 1.0 + 1e-9
        f_hi = residual(hi)
    lo, f_lo, n = hi, f_hi, 0
    while f_lo > 0.0:
        n += 1
        if n > 200:
            raise ArithmeticError("empirical fixed point: no lower bracket")
        lo *= 0.5
        f_lo = residual(lo)
    if f_lo == 0.0:
        return lo
    return find_root(residual, RootBracket(lo, hi, f_lo, f_hi), tol=1e-12 * (1 + abs(mean_u)))


def simulate_wealth(
    market: MarketModel,
    path: StrategyPath,
    t0: float,
    mc: McConfig,
) -> np.ndarray:
    """Samples of W_T / W_{t0} for the strategy, exact in distribution.

    Each grid interval contributes a Gaussian log increment with the
    trapezoid drift and variance of the piecewise market, matching the
    path's own cumulative quantities; n_steps is accepted for config
    compatibility but substepping cannot change the law.
    """
    if not 0.0 <= t0 < market.horizon:
        raise ValueError("t0 must lie in [0, horizon)")
    grid = path.grid
    later = grid[grid > t0 + 1e-15]
    times = np.concatenate([[t0], later])
    pis = np.vstack([path.pi_at(t) for t in times])
    rng = np.random.default_rng(mc.seed)
    log_w = np.zeros(mc.n_paths)
    for i in range(times.size - 1):
        dt = times[i + 1] - times[i]
        seg_mu = market.mu_at(times[i])
        seg_sigma = market.sigma_at(times[i])
        drift = 0.5 * float(pis[i] @ seg_mu + pis[i + 1] @ seg_mu) * dt
        var = (
            0.5
            * (
                float(np.sum((seg_sigma.T @ pis[i]) ** 2))
                + float(np.sum((seg_sigma.T @ pis[i + 1]) ** 2))
            )
            * dt
        )
        if var > 0.0:
            log_w += (drift - 0.5 * var) + math.sqrt(var) * rng.standard_normal(mc.n_paths)
        else:
            log_w += drift
    return np.exp(log_w)


@dataclass
class PerturbationResult:
    t: float
    k_index: int
    k: tuple
    mode: str  # "first-order" or "sqrt"
    coefficients: tuple  # leading-order coefficient per epsilon
    extrapolated: float
    limit: float  # theoretical sqrt-mode limit, NaN in first-order mode
    passed: bool


@dataclass
class PerturbationReport:
    results: list = field(default_factory=list)
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def table(self) -> dict:
        return {
            "t": np.array([r.t for r in self.results]),
            "k_index": np.array([r.k_index for r in self.results]),
            "first_order_coeff": np.array([r.extrapolated for r in self.results]),
            "pass": np.array([int(r.passed) for r in self.results]),
        }


def spike_directions(market: MarketModel, t: float, seed: int = 20240311) -> list:
    """Basket of 8 deterministic spike directions: scaled +-lambda, +-unit
    axis, and a seeded random pair."""
    lam = market.price_of_risk(t)
    norm = np.linalg.norm(lam)
    lam_hat = lam / norm if norm > 0 else np.eye(market.d)[0]
    e1 = np.eye(market.d)[0]
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(market.d)
    u /= np.linalg.norm(u)
    basket = [
        0.1 * lam_hat,
        -0.1 * lam_hat,
        0.5 * lam_hat,
        -0.5 * lam_hat,
        1.0 * e1,
        -1.0 * e1,
        0.3 * u,
        -0.3 * u,
    ]
    return basket


def _spike_increments(market: MarketModel, path: StrategyPath, t: float, eps: float, k: np.ndarray):
    """Exact-enough integrals of the perturbed risk and return over [t, t+eps)."""
    s = np.linspace(t, t + eps, 65)
    sig_k_sq = np.empty(s.size)
    cross = np.empty(s.size)
    drift = np.empty(s.size)
    for i, ti in enumerate(s):
        sig = market.sigma_at(min(ti, market.horizon))
        pi = path.pi_at(min(ti, market.horizon))
        sig_k = sig.T @ k
        sig_k_sq[i] = float(sig_k @ sig_k)
        cross[i] = float(k @ sig @ sig.T @ pi)
        drift[i] = float(k @ market.mu_at(min(ti, market.horizon)))
    dv = float(np.trapezoid(sig_k_sq + 2.0 * cross, s))
    dy = float(np.trapezoid(drift, s))
    return dv, dy


def perturbation_test(
    utility: Utility,
    params: GdaParams,
    market: MarketModel,
    path: StrategyPath,
    pert: PerturbationSpec,
    tol: float = 1e-6,
    surface: ValueSurface | None = None,
) -> PerturbationReport:
    """Leading-order value response to a spike at one time, many directions.

    For delta != 1 the response is first order in the spike length and an
    equilibrium keeps the coefficient nonpositive for every direction.  For
    the delta = 1 zero path the response scales like sqrt(eps) with
    coefficient |sigma(t)^T k| * c(beta) < 0.
    """
    t = pert.t
    if t + max(pert.epsilons) >= market.horizon:
        raise ValueError("t + max(epsilons) must stay below the horizon")
    surface = surface or ValueSurface(utility, params)
    report = PerturbationReport(tol=tol)
    v0 = float(np.interp(t, path.grid, path.v))
    y0 = float(np.interp(t, path.grid, path.y))
    zero_path = bool(np.abs(path.a).max() == 0.0)
    sqrt_mode = params.delta == 1.0 and zero_path
    base = surface.value(v0, y0)
    k = np.asarray(pert.k, dtype=float)
    coeffs = []
    for eps in pert.epsilons:
        dv, dy = _spike_increments(market, path, t, eps, k)
        bumped = surface.value(v0 + dv, y0 + dy)
        scale = math.sqrt(eps) if sqrt_mode else eps
        coeffs.append((bumped - base) / scale)
    if sqrt_mode:
        s1, s2 = math.sqrt(pert.epsilons[-2]), math.sqrt(pert.epsilons[-1])
        extrap = (coeffs[-1] * s1 - coeffs[-2] * s2) / (s1 - s2)
        sig_k = market.sigma_at(t).T @ k
        limit = float(np.linalg.norm(sig_k)) * da_small_risk_slope(params.beta)
        passed = abs(extrap - limit) <= max(tol, 1e-3) and extrap < 0.0
    else:
        e1, e2 = pert.epsilons[-2], pert.epsilons[-1]
        extrap = (coeffs[-1] * e1 - coeffs[-2] * e2) / (e1 - e2)
        limit = float("nan")
        passed = extrap <= tol
    report.results.append(
        PerturbationResult(
            t=t,
            k_index=0,
            k=tuple(float(v) for v in k),
            mode="sqrt" if sqrt_mode else "first-order",
            coefficients=tuple(coeffs),
            extrapolated=float(extrap),
            limit=limit,
            passed=bool(passed),
        )
    )
    return report


def certify_equilibrium(
    utility: Utility,
    params: GdaParams,
    market: MarketModel,
    path: StrategyPath,
    times=None,
    epsilons=(1e-2, 1e-4, 1e-6),
    tol: float = 1e-6,
    seed: int = 20240311,
) -> PerturbationReport:
    """Spike test over a basket of directions at several times."""
    if times is None:
        h = float(np.diff(path.grid).min())
        T = market.horizon
        times = [0.0, T / 3.0, 2.0 * T / 3.0, T - max(h, max(epsilons) * 1.01)]
    surface = ValueSurface(utility, params)
    report = PerturbationReport(tol=tol)
    for t in times:
        eps_ok = tuple(e for e in epsilons if t + e < market.horizon)
        for j, k in enumerate(spike_directions(market, t, seed=seed)):
            single = perturbation_test(
                utility,
                params,
                market,
                path,
                PerturbationSpec(t=t, k=tuple(k), epsilons=eps_ok),
                tol=tol,
                surface=surface,
            )
            res = single.results[0]
            res.k_index = j
            report.results.append(res)
    return report
