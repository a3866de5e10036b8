"""The GDA value surface of lognormal outcomes and its analytic partials.

``value(v, y)`` is the GDA value of a LogNormal(y - v/2, v) gross return,
i.e. the value a deterministic strategy with cumulative risk v and
cumulative return y is assigned.  The solved quantity is the log benchmark
offset z defined by

    delta * value = exp(y - v/2 + z),

which is better conditioned than the value itself for small risk.  All the
derivative formulas are expressed through z: with x = sqrt(v), a = z/x and
Z the outcome,

    dz/dx = E[U'(Z) Z (1 + beta 1{xi<a}) (xi - x)] / D + x,
    dz/dy = E[U'(Z) Z (1 + beta 1{xi<a})] / D - 1,
    D     = (U'(benchmark/delta)/delta + beta U'(benchmark) N(a)) * benchmark,

and the risk-tolerance multiplier (the reciprocal of twice the marginal
rate of substitution of cumulative risk for cumulative return) is

    m = E[U'(Z) Z (1 + beta 1)] /
        (-E[U''(Z) Z^2 (1 + beta 1)] + beta U'(b) b N'(a)/x).
"""

from __future__ import annotations

import math
import threading
import warnings

import numpy as np
from numpy.polynomial.legendre import leggauss

from .numerics import (
    EvaluationError,
    RootBracket,
    find_root,
    std_normal_cdf,
    std_normal_pdf,
)
from .preference import GdaParams, Utility

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_EDGE = 38.0
# dense half-unit panels where the density lives, coarse wings for the
# polynomial-growth tails
_PANEL_EDGES = np.unique(
    np.concatenate(
        [np.linspace(-_EDGE, -8.0, 16), np.linspace(-8.0, 8.0, 33), np.linspace(8.0, _EDGE, 16)]
    )
)
_GL16_X, _GL16_W = leggauss(16)
_PANEL_MIDS = 0.5 * (_PANEL_EDGES[1:] + _PANEL_EDGES[:-1])
_PANEL_HALFS = 0.5 * np.diff(_PANEL_EDGES)
_PANEL_NODES = _PANEL_MIDS[:, None] + _PANEL_HALFS[:, None] * _GL16_X[None, :]
_PANEL_PDF = _INV_SQRT_2PI * np.exp(-0.5 * _PANEL_NODES**2)
_PANEL_LIVE = _PANEL_PDF > 1e-280

# below this volatility the x=0 closed forms are blended in (delta != 1)
SMALL_X_CROSSOVER = 1e-4


class BoundaryError(ValueError):
    """The surface is not differentiable at the requested boundary point."""


class _PartialExpectation:
    """Cumulative integral of psi(xi) against the N(0,1) density.

    Panel-precomputed on [-38, 38] so that E[psi 1{xi<a}] is a table lookup
    plus one 16-point panel for the sliver ending at a.  Contributions
    beyond |xi| = 38 are dropped (density below 1e-314); psi must be finite
    wherever the density exceeds 1e-280.
    """

    __slots__ = ("psi", "cum", "full")

    def __init__(self, psi):
        # psi(z) evaluated on the fixed panel nodes; the density values there
        # are module constants
        self.psi = psi
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(psi(_PANEL_NODES), dtype=float)
            prod = np.where(_PANEL_PDF > 0.0, vals * _PANEL_PDF, 0.0)
        if not np.all(np.isfinite(prod[_PANEL_LIVE])):
            bad = _PANEL_NODES[_PANEL_LIVE][~np.isfinite(prod[_PANEL_LIVE])][0]
            raise EvaluationError("surface integrand is not finite", float(bad))
        panel = _PANEL_HALFS * (prod @ _GL16_W)
        self.cum = np.concatenate([[0.0], np.cumsum(panel)])
        self.full = float(self.cum[-1])

    def _products(self, z: np.ndarray) -> np.ndarray:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(self.psi(z), dtype=float)
            out = np.where(pdf > 0.0, vals * pdf, 0.0)
        live = pdf > 1e-280
        if not np.all(np.isfinite(out[live])):
            bad = z[live][~np.isfinite(out[live])][0]
            raise EvaluationError("surface integrand is not finite", float(bad))
        return out

    def below(self, a: float) -> float:
        if a <= -_EDGE:
            return 0.0
        if a >= _EDGE:
            return self.full
        i = int(np.searchsorted(_PANEL_EDGES, a)) - 1
        lo = _PANEL_EDGES[i]
        if a == lo:
            return float(self.cum[i])
        half = 0.5 * (a - lo)
        nodes = lo + half * (_GL16_X + 1.0)
        return float(self.cum[i] + half * (self._products(nodes) @ _GL16_W))


class _PointWorkspace:
    """Per-(x, y) expectation tables shared by the solve and its derivatives."""

    def __init__(self, utility: Utility, params: GdaParams, x: float, y: float):
        self.u = utility
        self.params = params
        self.x = x
        self.shift = y - 0.5 * x * x
        self._parts: dict[str, _PartialExpectation] = {}
        self._w_panel = None  # outcomes on the fixed panel nodes, shared by parts

    def _outcome(self, z):
        if z is _PANEL_NODES:
            if self._w_panel is None:
                with np.errstate(over="ignore"):
                    self._w_panel = np.exp(self.x * _PANEL_NODES + self.shift)
            return self._w_panel
        with np.errstate(over="ignore"):
            return np.exp(self.x * z + self.shift)

    def part(self, name: str) -> _PartialExpectation:
        got = self._parts.get(name)
        if got is not None:
            return got
        u, x = self.u, self.x
        if name == "u":
            psi = lambda z: u.u(self._outcome(z))
        elif name == "duz":
            psi = lambda z: u.d1(w := self._outcome(z)) * w
        elif name == "duz_dev":
            psi = lambda z: u.d1(w := self._outcome(z)) * w * (z - x)
        elif name == "d2uz2":
            psi = lambda z: u.d2(w := self._outcome(z)) * w * w
        else:  # pragma: no cover
            raise KeyError(name)
        made = _PartialExpectation(psi)
        self._parts[name] = made
        return made

    def residual(self, z: float) -> float:
        """The defining equation of the log benchmark offset at this point."""
        beta, delta = self.params.beta, self.params.delta
        pu = self.part("u")
        bench = math.exp(z + self.shift)
        base = float(self.u.u(bench / delta)) - pu.full
        if beta == 0.0:
            return base
        a = z / self.x
        return base + beta * (float(self.u.u(bench)) * std_normal_cdf(a) - pu.below(a))

    def eu_offset(self) -> float:
        """Offset of the disappointment-free (beta = 0) value."""
        g_eu = self.u.invert(self.part("u").full)
        return math.log(self.params.delta * g_eu) - self.shift

    def solve_offset(self, guess: float | None = None, tol: float = 1e-13) -> float:
        if self.params.beta == 0.0:
            return self.eu_offset()
        lo = hi = None
        if guess is not None:
            r = 1e-4
            for _ in range(6):
                cand_lo, cand_hi = guess - r, guess + r
                f_lo, f_hi = self.residual(cand_lo), self.residual(cand_hi)
                if f_lo <= 0.0 <= f_hi:
                    lo, hi = cand_lo, cand_hi
                    break
                r *= 8.0
        if lo is None:
            hi = self.eu_offset()
            f_hi = self.residual(hi)
            while f_hi < 0.0:  # rounding guard; penalty makes this >= 0
                hi += 1e-9 * (1.0 + abs(hi))
                f_hi = self.residual(hi)
            step = 0.35
            lo = hi - step
            f_lo = self.residual(lo)
            n = 0
            while f_lo > 0.0:
                n += 1
                if n > 200:
                    raise EvaluationError("offset bracket expansion failed", lo)
                step *= 2.0
                lo = hi - step
                f_lo = self.residual(lo)
            if f_lo == 0.0:
                return lo
        # Newton with the exact slope (the denominator), bisection-guarded
        z = 0.5 * (lo + hi)
        for _ in range(80):
            f = self.residual(z)
            if f > 0.0:
                hi = z
            elif f < 0.0:
                lo = z
            else:
                return z
            if hi - lo <= tol:
                return 0.5 * (lo + hi)
            z_new = z - f / self.denominator(z)
            if not lo < z_new < hi:
                z_new = 0.5 * (lo + hi)
            if abs(z_new - z) <= 0.5 * tol:
                return z_new
            z = z_new
        return find_root(self.residual, RootBracket.from_function(self.residual, lo, hi), tol=tol)

    def denominator(self, z: float) -> float:
        beta, delta = self.params.beta, self.params.delta
        bench = math.exp(z + self.shift)
        inner = float(self.u.d1(bench / delta)) / delta
        if beta > 0.0:
            inner += beta * float(self.u.d1(bench)) * std_normal_cdf(z / self.x)
        return inner * bench

    def grad(self, z: float) -> tuple[float, float]:
        beta = self.params.beta
        a = z / self.x
        D = self.denominator(z)
        dev = self.part("duz_dev")
        lvl = self.part("duz")
        num_x = dev.full + (beta * dev.below(a) if beta > 0.0 else 0.0)
        num_y = lvl.full + (beta * lvl.below(a) if beta > 0.0 else 0.0)
        return num_x / D + self.x, num_y / D - 1.0

    def dx_curvature(self, z: float) -> float:
        """dz/dx evaluated through U'' (agrees with grad()[0] for smooth U)."""
        if self.u.d2 is None:
            raise ValueError("curvature form needs the second derivative of the utility")
        beta = self.params.beta
        a = z / self.x
        D = self.denominator(z)
        curv = self.part("d2uz2")
        bench = math.exp(z + self.shift)
        num = self.x * (curv.full + (beta * curv.below(a) if beta > 0.0 else 0.0))
        if beta > 0.0:
            num -= beta * float(self.u.d1(bench)) * bench * std_normal_pdf(a)
        return num / D + self.x

    def risk_tolerance(self, z: float) -> float:
        if self.u.d2 is None:
            raise ValueError("risk tolerance needs the second derivative of the utility")
        beta = self.params.beta
        a = z / self.x
        lvl = self.part("duz")
        curv = self.part("d2uz2")
        num = lvl.full + (beta * lvl.below(a) if beta > 0.0 else 0.0)
        den = -(curv.full + (beta * curv.below(a) if beta > 0.0 else 0.0))
        if beta > 0.0:
            bench = math.exp(z + self.shift)
            den += beta * float(self.u.d1(bench)) * bench * std_normal_pdf(a) / self.x
        return num / den


class ValueSurface:
    """GDA value surface for one (utility, parameters) pair, with a memo cache.

    The cache maps rounded (x, y) points to solved offsets and derived
    scalars; reads and writes are guarded by a lock so concurrent use is
    safe.
    """

    def __init__(self, utility: Utility, params: GdaParams, root_tol: float = 1e-13):
        self.utility = utility
        self.params = params
        self.root_tol = root_tol
        self._cache: dict = {}
        self._lock = threading.Lock()

    # -- boundary (x = 0) closed forms ------------------------------------

    def _offset_at_zero(self, y: float) -> float:
        beta, delta = self.params.beta, self.params.delta
        if delta <= 1.0 or beta == 0.0:
            return math.log(delta)
        u = self.utility
        ey = math.exp(y)
        target = math.log(delta)

        def f(z):
            w = math.exp(z + y)
            return float(u.u(w / delta)) + beta * float(u.u(w)) - (1.0 + beta) * float(u.u(ey))

        bracket = RootBracket.from_function(f, 0.0, target)
        return find_root(f, bracket, tol=1e-14)

    def _offset_dy_at_zero(self, y: float) -> float:
        beta, delta = self.params.beta, self.params.delta
        if delta < 1.0 or beta == 0.0:
            return 0.0
        u = self.utility
        c = self._offset_at_zero(y)
        ey, ecy = math.exp(y), math.exp(c + y)
        denom = (float(u.d1(ecy / delta)) / delta + beta * float(u.d1(ecy))) * ecy
        return float(u.d1(ey)) * ey * (1.0 + beta) / denom - 1.0

    def _offset_dx_slope_at_zero(self, y: float) -> float:
        """Limit of (dz/dx)/x as x -> 0 (the offset is flat to first order)."""
        u = self.utility
        if u.d2 is None:
            raise ValueError("the x=0 slope needs the second derivative of the utility")
        beta, delta = self.params.beta, self.params.delta
        ey = math.exp(y)
        if delta < 1.0 or beta == 0.0:
            return float(u.d2(ey)) * ey / float(u.d1(ey)) + 1.0
        c = self._offset_at_zero(y)
        ecy = math.exp(c + y)
        denom = (float(u.d1(ecy / delta)) / delta + beta * float(u.d1(ecy))) * math.exp(c)
        return float(u.d2(ey)) * ey * (1.0 + beta) / denom + 1.0

    # -- cached solves ------------------------------------------------------

    def _entry(self, x: float, y: float) -> dict:
        key = (round(x, 12), round(y, 12))
        with self._lock:
            entry = self._cache.get(key)
            if entry is None:
                entry = {}
                self._cache[key] = entry
        return entry

    def _work(self, x: float, y: float) -> _PointWorkspace:
        return _PointWorkspace(self.utility, self.params, x, y)

    def log_benchmark_offset(self, x: float, y: float, guess: float | None = None) -> float:
        """The z with delta * value(x**2, y) = exp(y - x**2/2 + z)."""
        if x < 0.0:
            raise ValueError("x must be nonnegative")
        if x == 0.0:
            return self._offset_at_zero(y)
        delta = self.params.delta
        if delta != 1.0 and x < SMALL_X_CROSSOVER:
            z0 = self._offset_at_zero(y)
            z1 = self.log_benchmark_offset(SMALL_X_CROSSOVER, y)
            return z0 + (x / SMALL_X_CROSSOVER) * (z1 - z0)
        entry = self._entry(x, y)
        z = entry.get("z")
        if z is None:
            z = self._work(x, y).solve_offset(guess=guess, tol=self.root_tol)
            entry["z"] = z
        return z

    def log_benchmark_offset_grad(self, x: float, y: float) -> tuple[float, float]:
        """(dz/dx, dz/dy) at x > 0."""
        if x <= 0.0:
            raise ValueError("the gradient quotients need x > 0; use the boundary limits")
        entry = self._entry(x, y)
        grad = entry.get("grad")
        if grad is None:
            work = self._work(x, y)
            z = entry.get("z")
            if z is None:
                z = work.solve_offset(tol=self.root_tol)
                entry["z"] = z
            grad = work.grad(z)
            entry["grad"] = grad
        return grad

    def log_benchmark_offset_dx_curvature(self, x: float, y: float) -> float:
        """dz/dx through the curvature identity (cross-check of the gradient)."""
        if x <= 0.0:
            raise ValueError("the curvature form needs x > 0")
        work = self._work(x, y)
        z = self.log_benchmark_offset(x, y)
        return work.dx_curvature(z)

    def value(self, v: float, y: float) -> float:
        """GDA value of a LogNormal(y - v/2, v) outcome."""
        if v < 0.0:
            raise ValueError("v must be nonnegative")
        x = math.sqrt(v)
        z = self.log_benchmark_offset(x, y)
        return math.exp(y - 0.5 * v + z) / self.params.delta

    def value_partials(self, v: float, y: float) -> tuple[float, float, float]:
        """(value, d value/dv, d value/dy)."""
        if v < 0.0:
            raise ValueError("v must be nonnegative")
        delta = self.params.delta
        if v == 0.0 or (delta != 1.0 and v < SMALL_X_CROSSOVER**2):
            if delta == 1.0:
                raise BoundaryError(
                    "the surface is not differentiable at v = 0 when delta = 1"
                )
            g = self.value(0.0, y)
            slope = self._offset_dx_slope_at_zero(y)
            dy0 = self._offset_dy_at_zero(y)
            return g, (-0.5 + 0.5 * slope) * g, (1.0 + dy0) * g
        x = math.sqrt(v)
        g = self.value(v, y)
        zx, zy = self.log_benchmark_offset_grad(x, y)
        return g, (-0.5 + zx / (2.0 * x)) * g, (1.0 + zy) * g

    def risk_tolerance(self, x: float, y: float, guess: float | None = None) -> float:
        """m(x, y) = -g_y / (2 g_v): positive, and bounded when relative risk
        aversion is bounded away from zero."""
        if x < 0.0:
            raise ValueError("x must be nonnegative")
        delta = self.params.delta
        if x < SMALL_X_CROSSOVER:
            if delta == 1.0:
                if x == 0.0:
                    raise BoundaryError(
                        "risk tolerance degenerates at x = 0 when delta = 1"
                    )
            else:
                u = self.utility
                if u.d2 is None:
                    raise ValueError("risk tolerance needs the second derivative")
                ey = math.exp(y)
                return -float(u.d1(ey)) / (float(u.d2(ey)) * ey)
        entry = self._entry(x, y)
        m = entry.get("m")
        if m is None:
            work = self._work(x, y)
            z = entry.get("z")
            if z is None:
                z = work.solve_offset(guess=guess, tol=self.root_tol)
                entry["z"] = z
            m = work.risk_tolerance(z)
            entry["m"] = m
        return m

    def mrs(self, v: float, y: float) -> float:
        """Marginal rate of substitution of cumulative risk for cumulative return."""
        return 1.0 / (2.0 * self.risk_tolerance(math.sqrt(v), y))


def da_small_risk_slope(beta: float) -> float:
    """The negative constant c with c + beta*c*N(c) + beta*N'(c) = 0.

    Under pure disappointment aversion (delta = 1) the value of a small
    lognormal gamble falls below 1 by c * sqrt(variance): first-order risk
    aversion.  beta = 0 degenerates to expected utility, where the slope is 0.
    """
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    if beta == 0.0:
        warnings.warn("da_small_risk_slope(0.0) is the degenerate EU case", stacklevel=2)
        return 0.0

    def f(c):
        return c + beta * c * std_normal_cdf(c) + beta * std_normal_pdf(c)

    lo = -1.0
    while f(lo) > 0.0:
        lo *= 2.0
    return find_root(f, RootBracket.from_function(f, lo, 0.0), tol=1e-15)


def indifference_curve(
    utility: Utility,
    params: GdaParams,
    v_grid,
) -> np.ndarray:
    """Points (v, y, mrs) on the indifference curve through (0, 0).

    For each cumulative risk v, y(v) restores the value of the riskless
    position; the third column is the local MRS.  Rows match the CSV layout
    used by the figure presets.
    """
    surface = ValueSurface(utility, params)
    target = surface.value(0.0, 0.0)
    rows = []
    y_guess = 0.0
    for v in np.atleast_1d(np.asarray(v_grid, dtype=float)):
        if v == 0.0:
            rows.append((0.0, 0.0, _mrs_or_nan(surface, 0.0, 0.0)))
            continue

        def f(yy):
            return surface.value(v, yy) - target

        lo = y_guess
        f_lo = f(lo)
        while f_lo > 0.0:
            lo -= 0.25
            f_lo = f(lo)
        hi = lo + 0.25
        f_hi = f(hi)
        while f_hi < 0.0:
            hi += 0.25
            f_hi = f(hi)
        y_v = find_root(f, RootBracket(lo, hi, f_lo, f_hi), tol=1e-12)
        y_guess = y_v
        rows.append((float(v), float(y_v), _mrs_or_nan(surface, v, y_v)))
    return np.array(rows)


def _mrs_or_nan(surface: ValueSurface, v: float, y: float) -> float:
    try:
        return surface.mrs(v, y)
    except (BoundaryError, ValueError):
        return float("nan")
