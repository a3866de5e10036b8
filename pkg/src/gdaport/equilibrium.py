"""Backward interval-stitched Picard solver for the equilibrium exposure.

The equilibrium risk exposure solves the fixed-point equation

    a(t) = m(sqrt(integral_t^T |a|^2), integral_t^T a . lambda) * lambda(t),

where m is the risk-tolerance multiplier of the value surface.  The map is
a contraction on a short enough terminal window, so the solver sweeps
backward from the horizon: solve a window by Picard iteration with the
already-solved tail frozen, shrink the window and retry whenever the
observed iteration stops contracting.

Tail integrals accumulate by trapezoid.  Because m can have a sharp
transition layer in cumulative volatility (the disappointment indicator
saturates), the grid is refined adaptively where the local trapezoid error,
weighted by the path's own sensitivity |dm/dv|, would pollute the weights.

Under pure disappointment aversion (delta = 1) the unique equilibrium is
non-participation, handled by a dedicated constructor.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .market import MarketModel, SolverConfig, StrategyPath, build_grid
from .numerics import ConvergenceError, NumericsError
from .preference import GdaParams, Utility
from .surface import ValueSurface

DELTA_ONE_GUARD = 1e-6


class StepSizeError(NumericsError):
    """The Picard window never contracted, even after repeated shrinking."""


class AssumptionError(ValueError):
    """Relative risk aversion is not bounded away from zero, so the
    risk-tolerance multiplier may be unbounded."""


def risk_aversion_floor(utility: Utility) -> float:
    """Sampled bound: sup of 1 / relative risk aversion over a wealth grid."""
    if utility.d2 is None:
        raise AssumptionError("the solver needs the second derivative of the utility")
    w = np.geomspace(1e-4, 1e4, 41)
    rra = -w * np.asarray(utility.d2(w), dtype=float) / np.asarray(utility.d1(w), dtype=float)
    floor = float(rra.min())
    if not floor > 1e-12:
        raise AssumptionError(
            f"relative risk aversion dips to {floor:g}; the risk-tolerance "
            "multiplier is unbounded and the contraction argument fails"
        )
    return 1.0 / floor


def _tail_integrals(grid: np.ndarray, a: np.ndarray, lam: np.ndarray):
    """Trapezoid tails v(t_i) = int_{t_i}^T |a|^2 and y(t_i) = int_{t_i}^T a.lambda."""
    dt = np.diff(grid)
    f_v = np.einsum("ij,ij->i", a, a)
    f_y = np.einsum("ij,ij->i", a, lam)
    seg_v = 0.5 * (f_v[1:] + f_v[:-1]) * dt
    seg_y = 0.5 * (f_y[1:] + f_y[:-1]) * dt
    v = np.concatenate([np.cumsum(seg_v[::-1])[::-1], [0.0]])
    y = np.concatenate([np.cumsum(seg_y[::-1])[::-1], [0.0]])
    return v, y


def _lipschitz_estimate(m_fn, x_max: float, y_max: float) -> float:
    """Empirical Lipschitz constant of m over the reachable (x, y) box."""
    xs = np.linspace(0.0, max(x_max, 1e-3), 6)
    ys = np.linspace(-max(y_max, 1e-3), max(y_max, 1e-3), 5)
    vals = np.array([[m_fn(x, y) for y in ys] for x in xs])
    dx = np.abs(np.diff(vals, axis=0)) / np.diff(xs)[:, None]
    dy = np.abs(np.diff(vals, axis=1)) / np.diff(ys)[None, :]
    return max(float(dx.max()), float(dy.max()), 1e-6)


def _picard_windows(grid, lam, a, m_of, cfg, eps):
    """Backward window sweep; mutates ``a`` in place."""
    t_hi = grid[-1]
    width = eps
    shrinks = 0
    while t_hi > grid[0]:
        t_lo = max(grid[0], t_hi - width)
        i_lo = int(np.searchsorted(grid, t_lo))
        i_hi = int(np.searchsorted(grid, t_hi))
        if i_lo == i_hi:  # window narrower than the local grid: take one node
            i_lo = i_hi - 1
            t_lo = grid[i_lo]
        idx = np.arange(i_lo, i_hi)
        saved = a[idx].copy()
        prev_change = None
        converged = False
        for _ in range(cfg.max_picard_iters):
            v, y = _tail_integrals(grid, a, lam)
            a_new = np.array(
                [m_of(grid[i], math.sqrt(v[i]), y[i]) * lam[i] for i in idx]
            )
            change = float(np.abs(a_new - a[idx]).max()) if idx.size else 0.0
            a[idx] = a_new
            if change <= cfg.picard_tol:
                converged = True
                break
            if (
                prev_change is not None
                and change > 0.999 * prev_change
                and change > 100.0 * cfg.picard_tol
            ):
                break  # not contracting; shrink the window
            prev_change = change
        else:
            raise ConvergenceError(
                f"Picard iteration cap {cfg.max_picard_iters} hit on "
                f"[{t_lo:g}, {t_hi:g})"
            )
        if converged:
            t_hi = t_lo
            width = eps
            shrinks = 0
            continue
        a[idx] = saved
        shrinks += 1
        if shrinks > 40:
            raise StepSizeError(
                f"no contraction on [{t_lo:g}, {t_hi:g}) after {shrinks} shrinks"
            )
        width *= cfg.window_shrink
    return a


def _backward_sweep(grid, lam, a, m_of, cfg):
    """One backward pass of single-interval Picard windows.

    Node i only depends on nodes >= i plus its own trapezoid self-term, so a
    backward pass with a short local iteration lands on the fixed point of
    the discretized equation; tails accumulate incrementally.
    """
    n = grid.size
    f_v = np.einsum("ij,ij->i", a, a)
    f_y = np.einsum("ij,ij->i", a, lam)
    a[n - 1] = m_of(grid[n - 1], 0.0, 0.0) * lam[n - 1]
    f_v[n - 1] = float(a[n - 1] @ a[n - 1])
    f_y[n - 1] = float(a[n - 1] @ lam[n - 1])
    v_next = 0.0
    y_next = 0.0
    worst_change = 0.0
    for i in range(n - 2, -1, -1):
        dt = grid[i + 1] - grid[i]
        for _ in range(cfg.max_picard_iters):
            v_i = v_next + 0.5 * dt * (f_v[i] + f_v[i + 1])
            y_i = y_next + 0.5 * dt * (f_y[i] + f_y[i + 1])
            a_new = m_of(grid[i], math.sqrt(v_i), y_i) * lam[i]
            change = float(np.abs(a_new - a[i]).max())
            a[i] = a_new
            f_v[i] = float(a_new @ a_new)
            f_y[i] = float(a_new @ lam[i])
            if change <= cfg.picard_tol:
                break
        else:
            raise ConvergenceError(
                f"local Picard iteration cap hit at node t={grid[i]:g}"
            )
        worst_change = max(worst_change, change)
        v_next = v_next + 0.5 * dt * (f_v[i] + f_v[i + 1])
        y_next = y_next + 0.5 * dt * (f_y[i] + f_y[i + 1])
    return _tail_integrals(grid, a, lam)


def _refinement_splits(grid, a, lam, m_vals, pi_sens, target):
    """Per-interval split counts sized so trapezoid error stops polluting pi.

    The local error of interval j is ~ h^3 f''/12 and is felt at node i <= j
    through that node's |dm/dv|; splitting an interval into k parts divides
    its error by k^2.  Returns (worst predicted weight error, split counts).
    """
    dt = np.diff(grid)
    f_v = np.einsum("ij,ij->i", a, a)
    # second derivative estimate per interior node, extended to the ends
    d1 = np.diff(f_v) / dt
    curv = np.zeros(grid.size)
    curv[1:-1] = np.abs(np.diff(d1) / (0.5 * (dt[1:] + dt[:-1])))
    curv[0] = curv[1]
    curv[-1] = curv[-2]
    e = dt**3 * np.maximum(curv[1:], curv[:-1]) / 12.0
    v, _ = _tail_integrals(grid, a, lam)
    dv = np.diff(v)
    dm = np.diff(m_vals)
    with np.errstate(divide="ignore", invalid="ignore"):
        sens = np.abs(np.where(np.abs(dv) > 1e-300, dm / dv, 0.0))
    # node i feels intervals j >= i; bound its sensitivity by the suffix max
    sens_node = np.concatenate([[0.0], np.maximum.accumulate(sens[::-1])])[::-1]
    tail_err = np.concatenate([np.cumsum(e[::-1])[::-1], [0.0]])
    pi_err = sens_node * tail_err * pi_sens
    worst = float(pi_err.max())
    splits = np.ones(e.size, dtype=int)
    if worst <= target:
        return worst, splits
    # an interval's error matters through the most sensitive node to its left
    left_sens = np.maximum.accumulate(sens_node[:-1] * pi_sens[:-1])
    contrib = e * left_sens
    live = contrib > target / (100.0 * max(1, e.size))
    budget = target / (2.0 * max(1, int(live.sum())))
    need = np.sqrt(np.maximum(contrib / budget, 1.0))
    splits = np.clip(np.ceil(need).astype(int), 1, 16)
    splits[dt <= 1e-7] = 1
    return worst, splits


def solve_fixed_point(
    market: MarketModel,
    grid: np.ndarray,
    m_of,
    cfg: SolverConfig,
    bound: float,
    lipschitz: float,
    initial_scale: float | None = None,
) -> StrategyPath:
    """Shared engine: solve a(t) = m(t, x(t), y(t)) lambda(t) backward in time.

    ``m_of(t, x, y)`` evaluates the risk-tolerance multiplier; ``bound`` is
    its uniform bound and ``lipschitz`` an empirical Lipschitz constant,
    which size the first trust window as in the contraction argument.
    ``initial_scale`` overrides the first iterate with the constant exposure
    initial_scale * bound * sup|lambda| (0 and 1 probe the uniqueness of the
    fixed point from opposite ends of the admissible ball).
    """
    horizon = market.horizon

    def lam_of(g):
        return np.array([market.price_of_risk(t) for t in g])

    lam = lam_of(grid)
    lam_max = float(np.sqrt((lam * lam).sum(axis=1)).max())
    if lam_max == 0.0:
        eps = horizon
    else:
        eps = min(
            1.0,
            horizon,
            1.0 / (4.0 * lipschitz**2 * lam_max**2 * (1.0 + lam_max) ** 2),
        )

    # skip re-evaluating m when its arguments moved by less than what the
    # Lipschitz constant can turn into a visible change
    skip_tol = 0.05 * cfg.picard_tol / max(lipschitz, 1e-6)
    memo: dict = {}

    def m_eval(t, x, y):
        # sub-rounding argument jitter cannot move m visibly but would defeat
        # the caches, so quantize first
        x, y = round(x, 13), round(y, 13)
        key = round(t, 12)
        prev = memo.get(key)
        if prev is not None and abs(x - prev[0]) + abs(y - prev[1]) <= skip_tol:
            return prev[2]
        m = m_of(t, x, y)
        memo[key] = (x, y, m)
        return m

    a = None
    for round_no in range(cfg.max_refine_rounds + 1):
        if a is None:
            if initial_scale is None:
                a = np.array([m_eval(t, 0.0, 0.0) for t in grid])[:, None] * lam
            else:
                a = np.full_like(lam, initial_scale * bound * lam_max / math.sqrt(lam.shape[1]))
        if round_no == 0:
            # first round follows the contraction construction: stitched
            # windows of the trust size, shrunk on observed non-contraction
            win = max(eps, float(np.diff(grid).min()))
            _picard_windows(grid, lam, a, m_eval, cfg, win)
        v, y = _backward_sweep(grid, lam, a, m_eval, cfg)
        m_vals = np.array(
            [m_eval(grid[i], math.sqrt(v[i]), y[i]) for i in range(grid.size)]
        )
        pi_sens = np.array(
            [
                float(np.linalg.norm(market.weights_from_exposure(t, lam[i])))
                for i, t in enumerate(grid)
            ]
        )
        worst, splits = _refinement_splits(grid, a, lam, m_vals, pi_sens, cfg.refine_target)
        if int(splits.max()) <= 1 or grid.size >= cfg.max_nodes:
            break
        inserts = [
            np.linspace(grid[j], grid[j + 1], k + 1)[1:-1]
            for j, k in enumerate(splits)
            if k > 1
        ]
        new_grid = np.union1d(grid, np.concatenate(inserts))
        a = np.column_stack(
            [np.interp(new_grid, grid, a[:, j]) for j in range(a.shape[1])]
        )
        grid = new_grid
        lam = lam_of(grid)

    m_vals = np.array([m_eval(grid[i], math.sqrt(v[i]), y[i]) for i in range(grid.size)])
    residual = np.sqrt(((a - m_vals[:, None] * lam) ** 2).sum(axis=1))
    worst_res = float(residual.max())
    if worst_res > 10.0 * cfg.picard_tol:
        raise ConvergenceError(
            f"fixed-point residual {worst_res:g} exceeds 10 * picard_tol"
        )
    a_norm = float(np.sqrt((a * a).sum(axis=1)).max())
    if lam_max > 0.0 and a_norm > bound * lam_max * (1 + 1e-6):
        raise ConvergenceError("solution left its theoretical bound; distrust the run")
    pi = np.array([market.weights_from_exposure(grid[i], a[i]) for i in range(grid.size)])
    return StrategyPath(grid=grid, a=a, pi=pi, v=v, y=y, m=m_vals, residual=residual)


def solve_equilibrium(
    utility: Utility,
    params: GdaParams,
    market: MarketModel,
    cfg: SolverConfig | None = None,
) -> StrategyPath:
    """Unique equilibrium exposure for delta != 1 via the value surface."""
    if params.delta == 1.0:
        raise ValueError(
            "delta = 1 is pure disappointment aversion: use solve_equilibrium_da "
            "(non-participation is the unique equilibrium)"
        )
    if abs(params.delta - 1.0) < DELTA_ONE_GUARD:
        warnings.warn(
            "delta within 1e-6 of 1: the surface solve is ill-conditioned here",
            stacklevel=2,
        )
    cfg = cfg or SolverConfig()
    bound = risk_aversion_floor(utility)
    surface = ValueSurface(utility, params)
    grid = build_grid(market, cfg.grid_step)
    guesses: dict = {}

    def m_of(t, x, y):
        key = round(t, 12)
        z = surface.log_benchmark_offset(x, y, guess=guesses.get(key))
        guesses[key] = z
        return surface.risk_tolerance(x, y)

    lam_max = max(float(np.linalg.norm(market.price_of_risk(t))) for t in grid)
    x_max = bound * lam_max * math.sqrt(market.horizon)
    y_max = bound * lam_max**2 * market.horizon
    lip = _lipschitz_estimate(lambda x, y: surface.risk_tolerance(x, y), x_max, y_max)
    return solve_fixed_point(market, grid, m_of, cfg, bound, lip)


def solve_equilibrium_da(
    utility: Utility,
    params: GdaParams,
    market: MarketModel,
    grid_step: float = 0.01,
) -> StrategyPath:
    """Non-participation path: the unique equilibrium when delta = 1."""
    if params.delta != 1.0:
        raise ValueError("solve_equilibrium_da requires delta = 1")
    grid = build_grid(market, grid_step)
    n = grid.size
    zeros = np.zeros((n, market.d))
    return StrategyPath(
        grid=grid,
        a=zeros,
        pi=zeros.copy(),
        v=np.zeros(n),
        y=np.zeros(n),
        m=np.zeros(n),
        residual=np.zeros(n),
    )


def equilibrium_residual(
    utility: Utility,
    params: GdaParams,
    market: MarketModel,
    path: StrategyPath,
) -> np.ndarray:
    """Per-node normalized residual of the risk/return trade-off condition.

    Returns ||2 sigma^T pi g_v + lambda g_y|| / (|g_v| + |g_y|) per node; a
    valid equilibrium stays below ~1e-6 everywhere.  Nodes where the surface
    is not differentiable (v = 0 under delta = 1) report NaN.
    """
    surface = ValueSurface(utility, params)
    out = np.empty(path.grid.size)
    for i, t in enumerate(path.grid):
        if params.delta == 1.0 and path.v[i] == 0.0:
            out[i] = np.nan
            continue
        g, g_v, g_y = surface.value_partials(path.v[i], path.y[i])
        if g_v > 0.0:
            raise NumericsError(
                f"value surface slope g_v={g_v:g} is positive at node {i}"
            )
        sig = market.sigma_at(t)
        lam = market.price_of_risk(t)
        vec = 2.0 * (sig.T @ path.pi[i]) * g_v + lam * g_y
        out[i] = float(np.linalg.norm(vec)) / (abs(g_v) + abs(g_y))
    return out
