"""Pure-Python fallback kernels for the CRRA fast path.

Mirrors the compiled extension exactly: same equations, same bracketing,
same termination rules, so the two implementations agree to rounding.
"""

from __future__ import annotations

import math

import numpy as np

IMPLEMENTATION = "pure"

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT1_2 = math.sqrt(0.5)


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z * _SQRT1_2)


def norm_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def _penalty_slope(beta: float, t: float) -> float:
    """d/dt log(1 + beta*N(t)): the disappointment drag on risk tolerance."""
    return beta * norm_pdf(t) / (1.0 + beta * norm_cdf(t))


def _log_benchmark_at_zero(rho: float, beta: float, delta: float) -> float:
    if delta < 1.0 or beta == 0.0:
        return math.log(delta)
    if rho == 1.0:
        return math.log(delta) / (1.0 + beta)
    s = 1.0 - rho
    return math.log((1.0 + beta) / (delta ** (rho - 1.0) + beta)) / s


def _solve_log_rho1(beta: float, delta: float, x: float) -> float:
    # F(z) = z - log(delta) + beta*N(z/x)*z + beta*x*N'(z/x); F' = 1 + beta*N(z/x)
    logd = math.log(delta)

    def f(z: float) -> float:
        t = z / x
        return z - logd + beta * (norm_cdf(t) * z + x * norm_pdf(t))

    z = logd
    v = f(z)
    if v == 0.0:
        return z
    # F' is within [1, 1+beta], so one evaluation brackets the root
    if v > 0.0:
        lo, hi = z - v, z - v / (1.0 + beta)
    else:
        lo, hi = z - v / (1.0 + beta), z - v
    flo, fhi = f(lo), f(hi)
    if flo > 0.0:
        return lo
    if fhi < 0.0:
        return hi
    z = 0.5 * (lo + hi)
    for _ in range(120):
        v = f(z)
        if v > 0.0:
            hi = z
        elif v < 0.0:
            lo = z
        else:
            return z
        if hi - lo <= 1e-15 * (1.0 + abs(z)):
            return 0.5 * (lo + hi)
        step = v / (1.0 + beta * norm_cdf(z / x))
        z_new = z - step
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= 1e-16 * (1.0 + abs(z)):
            return z_new
        z = z_new
    return z


def _solve_log_general(rho: float, beta: float, delta: float, x: float) -> float:
    # scaled value equation, orientation fixed so g0 is increasing in z
    s = 1.0 - rho
    dpow = delta ** (rho - 1.0)
    b_half_sq = 0.5 * s * s * x * x
    sgn = 1.0 if s > 0.0 else -1.0

    def g0(z: float) -> float:
        a = s * z
        c = max(a, b_half_sq)
        t = z / x
        lhs = math.exp(a - c) * (dpow + beta * norm_cdf(t))
        rhs = math.exp(b_half_sq - c) * (1.0 + beta * norm_cdf(t - s * x))
        return sgn * (lhs - rhs)

    def g0prime(z: float) -> float:
        a = s * z
        c = max(a, b_half_sq)
        return abs(s) * math.exp(a - c) * (dpow + beta * norm_cdf(z / x))

    z_hi = math.log(delta) + s * x * x / 2.0  # disappointment-free value
    v_hi = g0(z_hi)
    if v_hi == 0.0:
        return z_hi
    step = max(0.5, x)
    z_lo = z_hi - step
    v_lo = g0(z_lo)
    n = 0
    while v_lo > 0.0:
        n += 1
        if n > 200:
            raise ArithmeticError("CRRA value equation: no lower bracket found")
        step *= 2.0
        z_lo = z_hi - step
        v_lo = g0(z_lo)
    lo, hi = z_lo, z_hi
    z = 0.5 * (lo + hi)
    for _ in range(200):
        v = g0(z)
        if v > 0.0:
            hi = z
        elif v < 0.0:
            lo = z
        else:
            return z
        if hi - lo <= 1e-15 * (1.0 + abs(z)):
            return 0.5 * (lo + hi)
        dp = g0prime(z)
        z_new = z - v / dp if dp > 0.0 else 0.5 * (lo + hi)
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= 1e-16 * (1.0 + abs(z)):
            return z_new
        z = z_new
    return z


def crra_log_benchmark(rho: float, beta: float, delta: float, x: float) -> float:
    """log(delta * value(x^2)) for the CRRA preference; value is the GDA value
    of a LogNormal(0, x^2) gross return."""
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return _log_benchmark_at_zero(rho, beta, delta)
    if beta == 0.0:
        return math.log(delta) + (1.0 - rho) * x * x / 2.0
    if rho == 1.0:
        return _solve_log_rho1(beta, delta, x)
    return _solve_log_general(rho, beta, delta, x)


def crra_risk_tolerance(rho: float, beta: float, delta: float, x: float) -> float:
    """Merton-like risk-tolerance multiplier m(x); equals 1/rho when beta = 0."""
    if x == 0.0 or beta == 0.0:
        return 1.0 / rho
    z = crra_log_benchmark(rho, beta, delta, x)
    return x / (rho * x + _penalty_slope(beta, z / x - (1.0 - rho) * x))


def crra_inv_sq_tolerance(rho: float, beta: float, delta: float, v: float) -> float:
    """1/m(sqrt(v))^2, the integrand of the cumulative risk budget."""
    if v <= 0.0 or beta == 0.0:
        return rho * rho
    x = math.sqrt(v)
    z = crra_log_benchmark(rho, beta, delta, x)
    r = rho + _penalty_slope(beta, z / x - (1.0 - rho) * x) / x
    return r * r


def crra_risk_tolerance_many(rho: float, beta: float, delta: float, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    out = np.empty(xs.size, dtype=float)
    flat = xs.ravel()
    for i in range(flat.size):
        out[i] = crra_risk_tolerance(rho, beta, delta, float(flat[i]))
    return out.reshape(xs.shape)


def crra_inv_sq_tolerance_many(rho: float, beta: float, delta: float, vs) -> np.ndarray:
    vs = np.asarray(vs, dtype=float)
    out = np.empty(vs.size, dtype=float)
    flat = vs.ravel()
    for i in range(flat.size):
        out[i] = crra_inv_sq_tolerance(rho, beta, delta, float(flat[i]))
    return out.reshape(vs.shape)
