"""Shared numerical kernel.

Standard-normal functions, Gaussian quadrature for lognormal expectations,
bracketed root finding, monotone-function inversion, and adaptive 1-D
integration.  Everything here is a pure function of its inputs and safe to
call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

DEFAULT_ROOT_TOL = 1e-10
DEFAULT_INTEGRAL_TOL = 1e-9

# |xi| beyond which exp(-xi^2/2) is subnormal; tail contributions of
# polynomial-growth integrands against the normal density are dropped there.
XI_SUPPORT = 38.0

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NumericsError(Exception):
    """Base class for numerical-kernel failures."""


class BracketError(NumericsError):
    """No sign change over the supplied or searched interval."""


class ConvergenceError(NumericsError):
    """Iteration or subdivision cap exceeded before reaching tolerance."""


class EvaluationError(NumericsError):
    """An integrand returned a non-finite value on the integration support."""

    def __init__(self, message: str, node: float):
        super().__init__(f"{message} (at node {node!r})")
        self.node = node


def std_normal_cdf(z):
    """Standard normal distribution function, accurate to ~1 ulp (erf based)."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("std_normal_cdf requires finite input")
    out = ndtr(z)
    return float(out) if out.ndim == 0 else out


def std_normal_pdf(z):
    """Standard normal density (2*pi)**-0.5 * exp(-z**2/2)."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("std_normal_pdf requires finite input")
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights normalized so that sum(weights * f(nodes)) ~ E[f(xi)], xi ~ N(0,1)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.order < 16:
            raise ValueError("quadrature order must be at least 16")
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if np.any(weights <= 0.0):
            raise ValueError("quadrature weights must be positive")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("quadrature nodes must be strictly increasing")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("normalized quadrature weights must sum to 1")

    @classmethod
    def gauss_hermite(cls, order: int = 128) -> "QuadratureRule":
        """Gauss-Hermite rule rescaled for expectations against N(0,1)."""
        t, w = np.polynomial.hermite.hermgauss(order)
        return cls(nodes=t * math.sqrt(2.0), weights=w / math.sqrt(math.pi), order=order)


_DEFAULT_RULE: QuadratureRule | None = None


def default_rule() -> QuadratureRule:
    global _DEFAULT_RULE
    if _DEFAULT_RULE is None:
        _DEFAULT_RULE = QuadratureRule.gauss_hermite(128)
    return _DEFAULT_RULE


def _as_vectorized(f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    """Adapt a scalar-or-vectorized callable to a guaranteed array callable."""

    def wrapped(x: np.ndarray) -> np.ndarray:
        try:
            out = np.asarray(f(x), dtype=float)
        except (TypeError, ValueError):
            return np.array([float(f(s)) for s in x], dtype=float)
        if out.shape != x.shape:
            return np.array([float(f(s)) for s in x], dtype=float)
        return out

    return wrapped


# Embedded Gauss-Legendre pair used for the adaptive panels: the coarse value
# estimates the error of the fine one.
_GL_COARSE = leggauss(20)
_GL_FINE = leggauss(41)


def _panel_values(f, lo: np.ndarray, hi: np.ndarray, rule) -> np.ndarray:
    """Gauss-Legendre estimates of integral(f) over each [lo_i, hi_i]."""
    x, w = rule
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = f(nodes.ravel())
    if not np.all(np.isfinite(vals)):
        bad = nodes.ravel()[~np.isfinite(vals)][0]
        raise EvaluationError("integrand returned a non-finite value", float(bad))
    vals = vals.reshape(nodes.shape)
    return half * (vals @ w)


def integrate_1d(
    f: Callable,
    a: float,
    b: float,
    tol: float = DEFAULT_INTEGRAL_TOL,
    max_panels: int = 4096,
) -> float:
    """Adaptive definite integral of a continuous f over [a, b].

    Panels are bisected until the embedded coarse/fine Gauss estimates agree
    within the panel's share of ``tol``; exceeding ``max_panels`` raises
    ConvergenceError.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    fv = _as_vectorized(f)
    total_width = b - a
    lo = np.array([a])
    hi = np.array([b])
    acc = 0.0
    n_done = 0
    while lo.size:
        if n_done + lo.size > max_panels:
            raise ConvergenceError(
                f"integrate_1d exceeded {max_panels} panels (tol={tol:g})"
            )
        fine = _panel_values(fv, lo, hi, _GL_FINE)
        coarse = _panel_values(fv, lo, hi, _GL_COARSE)
        err = np.abs(fine - coarse)
        budget = tol * (hi - lo) / total_width
        ok = err <= np.maximum(budget, 1e-16 * np.abs(fine))
        acc += fine[ok].sum()
        n_done += int(ok.sum())
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([mid, hi])
    return sign * acc


def lognormal_expect(
    f: Callable,
    x: float,
    y: float,
    restrict_below: float | None = None,
    rule: QuadratureRule | None = None,
    tol: float = DEFAULT_INTEGRAL_TOL,
) -> float:
    """E[f(exp(x*xi + y - x**2/2)) * 1{xi < a}] for xi ~ N(0,1).

    With ``restrict_below=None`` the full expectation is evaluated by
    Gauss-Hermite quadrature.  A finite ``restrict_below=a`` switches to
    adaptive panel integration on (-inf, a] so the truncation point is
    resolved exactly (fixed Hermite nodes straddle the kink poorly).
    """
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError("lognormal_expect requires finite x and y")
    if x < 0.0:
        raise ValueError("x (volatility) must be nonnegative")
    fv = _as_vectorized(f)
    shift = y - 0.5 * x * x
    if x == 0.0:
        w0 = math.exp(shift)
        if restrict_below is not None and not restrict_below > 0.0:
            return 0.0
        val = float(fv(np.array([w0]))[0])
        if not np.isfinite(val):
            raise EvaluationError("integrand returned a non-finite value", w0)
        return val
    if restrict_below is None:
        q = rule if rule is not None else default_rule()
        w = np.exp(x * q.nodes + shift)
        vals = fv(w)
        if not np.all(np.isfinite(vals)):
            bad = w[~np.isfinite(vals)][0]
            raise EvaluationError("integrand returned a non-finite value", float(bad))
        return float(q.weights @ vals)
    a = float(restrict_below)
    if math.isnan(a):
        raise ValueError("restrict_below must not be NaN")
    if a <= -XI_SUPPORT:
        return 0.0
    hi = min(a, XI_SUPPORT)

    def integrand(z: np.ndarray) -> np.ndarray:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = fv(np.exp(x * z + shift))
            out = np.where(pdf > 0.0, vals * pdf, 0.0)
        live = pdf > 1e-280
        if not np.all(np.isfinite(out[live])):
            bad = z[live][~np.isfinite(out[live])][0]
            raise EvaluationError(
                "integrand returned a non-finite value", math.exp(x * float(bad) + shift)
            )
        return out

    return integrate_1d(integrand, -XI_SUPPORT, hi, tol=tol)


@dataclass(frozen=True)
class RootBracket:
    """Interval with a sign change: f(lo) * f(hi) <= 0."""

    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("bracket requires lo < hi")
        if self.f_lo * self.f_hi > 0.0:
            raise BracketError(
                f"no sign change on [{self.lo}, {self.hi}]: "
                f"f(lo)={self.f_lo:g}, f(hi)={self.f_hi:g}"
            )

    @classmethod
    def from_function(cls, f: Callable[[float], float], lo: float, hi: float) -> "RootBracket":
        return cls(lo, hi, float(f(lo)), float(f(hi)))


def find_root(
    f: Callable[[float], float],
    bracket: RootBracket,
    tol: float = DEFAULT_ROOT_TOL,
    max_iter: int = 200,
) -> float:
    """Root of f inside a sign-change bracket.

    Safeguarded secant/inverse-quadratic steps with a bisection fallback
    (Brent); terminates when |f| <= tol or the bracket width falls below
    tol + machine resolution.  Never takes an unguarded Newton step.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a, b = bracket.lo, bracket.hi
    fa, fb = bracket.f_lo, bracket.f_hi
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        width_tol = 2.0 * np.finfo(float).eps * abs(b) + 0.5 * tol
        m = 0.5 * (c - b)
        if abs(fb) <= tol or abs(m) <= width_tol:
            return b
        if abs(e) < width_tol or abs(fa) <= abs(fb):
            d = e = m
        else:
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            s, e = e, d
            if 2.0 * p < 3.0 * m * q - abs(width_tol * q) and p < abs(0.5 * s * q):
                d = p / q
            else:
                d = e = m
        a, fa = b, fb
        b += d if abs(d) > width_tol else math.copysign(width_tol, m)
        fb = float(f(b))
        if (fb > 0.0) == (fc > 0.0):
            c, fc = a, fa
            d = e = b - a
    raise ConvergenceError(f"find_root did not converge in {max_iter} iterations")


def invert_monotone(
    F: Callable[[float], float],
    target: float,
    lo: float,
    hi_hint: float,
    tol: float = DEFAULT_ROOT_TOL,
    max_expand: int = 200,
) -> float:
    """Solve F(x) = target for strictly increasing continuous F with F(lo) <= target.

    ``hi_hint`` is expanded geometrically until F exceeds the target; hitting
    the expansion cap raises BracketError (the inverse looks unbounded).
    """
    f_lo = float(F(lo)) - target
    if f_lo > 0.0:
        raise ValueError("invert_monotone requires F(lo) <= target")
    if f_lo == 0.0:
        return lo
    hi = hi_hint if hi_hint > lo else lo + max(1.0, abs(lo))
    f_hi = float(F(hi)) - target
    n = 0
    while f_hi < 0.0:
        n += 1
        if n > max_expand:
            raise BracketError(
                f"invert_monotone: F never reached target {target:g} "
                f"(expanded to hi={hi:g})"
            )
        hi = lo + 2.0 * (hi - lo)
        f_hi = float(F(hi)) - target
    root = find_root(
        lambda s: float(F(s)) - target,
        RootBracket(lo, hi, f_lo, f_hi),
        tol=min(tol, 1e-13 * max(1.0, abs(hi))),
    )
    # polish until the *residual* meets tol; the width criterion alone can
    # stop short when F is steep
    r = float(F(root)) - target
    if abs(r) > tol:
        span = max(abs(hi - lo) * 1e-12, 1e-15 * max(1.0, abs(root)))
        for _ in range(60):
            a, b = root - span, root + span
            fa, fb = float(F(a)) - target, float(F(b)) - target
            if fa <= 0.0 <= fb:
                root = find_root(lambda s: float(F(s)) - target, RootBracket(a, b, fa, fb), tol=1e-15)
                break
            span *= 4.0
    return root
