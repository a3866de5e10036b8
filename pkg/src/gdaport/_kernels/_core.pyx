# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the CRRA fast path (see _pure.py for the reference)."""

from libc.math cimport erfc, exp, log, sqrt, fabs, pow

import numpy as np

IMPLEMENTATION = "compiled"

cdef double INV_SQRT_2PI = 0.3989422804014326779399461
cdef double SQRT1_2 = 0.7071067811865475244008444


cdef inline double _cdf(double z) nogil:
    return 0.5 * erfc(-z * SQRT1_2)


cdef inline double _pdf(double z) nogil:
    return INV_SQRT_2PI * exp(-0.5 * z * z)


cdef inline double _penalty_slope(double beta, double t) nogil:
    return beta * _pdf(t) / (1.0 + beta * _cdf(t))


cdef double _log_benchmark_at_zero(double rho, double beta, double delta) nogil:
    cdef double s
    if delta < 1.0 or beta == 0.0:
        return log(delta)
    if rho == 1.0:
        return log(delta) / (1.0 + beta)
    s = 1.0 - rho
    return log((1.0 + beta) / (pow(delta, rho - 1.0) + beta)) / s


cdef double _f_rho1(double beta, double logd, double x, double z) nogil:
    cdef double t = z / x
    return z - logd + beta * (_cdf(t) * z + x * _pdf(t))


cdef double _solve_log_rho1(double beta, double delta, double x) nogil:
    cdef double logd = log(delta)
    cdef double z = logd
    cdef double v = _f_rho1(beta, logd, x, z)
    cdef double lo, hi, flo, fhi, step, z_new
    cdef int i
    if v == 0.0:
        return z
    if v > 0.0:
        lo = z - v
        hi = z - v / (1.0 + beta)
    else:
        lo = z - v / (1.0 + beta)
        hi = z - v
    flo = _f_rho1(beta, logd, x, lo)
    fhi = _f_rho1(beta, logd, x, hi)
    if flo > 0.0:
        return lo
    if fhi < 0.0:
        return hi
    z = 0.5 * (lo + hi)
    for i in range(120):
        v = _f_rho1(beta, logd, x, z)
        if v > 0.0:
            hi = z
        elif v < 0.0:
            lo = z
        else:
            return z
        if hi - lo <= 1e-15 * (1.0 + fabs(z)):
            return 0.5 * (lo + hi)
        step = v / (1.0 + beta * _cdf(z / x))
        z_new = z - step
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if fabs(z_new - z) <= 1e-16 * (1.0 + fabs(z)):
            return z_new
        z = z_new
    return z


cdef double _g0_general(double s, double dpow, double beta, double x,
                        double b_half_sq, double sgn, double z) nogil:
    cdef double a = s * z
    cdef double c = a if a > b_half_sq else b_half_sq
    cdef double t = z / x
    cdef double lhs = exp(a - c) * (dpow + beta * _cdf(t))
    cdef double rhs = exp(b_half_sq - c) * (1.0 + beta * _cdf(t - s * x))
    return sgn * (lhs - rhs)


cdef double _solve_log_general(double rho, double beta, double delta, double x) nogil:
    cdef double s = 1.0 - rho
    cdef double dpow = pow(delta, rho - 1.0)
    cdef double b_half_sq = 0.5 * s * s * x * x
    cdef double sgn = 1.0 if s > 0.0 else -1.0
    cdef double z_hi = log(delta) + s * x * x / 2.0
    cdef double v_hi = _g0_general(s, dpow, beta, x, b_half_sq, sgn, z_hi)
    cdef double step, z_lo, v_lo, lo, hi, z, v, a, c, dp, z_new
    cdef int n, i
    if v_hi == 0.0:
        return z_hi
    step = 0.5 if x < 0.5 else x
    z_lo = z_hi - step
    v_lo = _g0_general(s, dpow, beta, x, b_half_sq, sgn, z_lo)
    n = 0
    while v_lo > 0.0:
        n += 1
        if n > 200:
            return z_lo  # unreachable for valid parameters
        step *= 2.0
        z_lo = z_hi - step
        v_lo = _g0_general(s, dpow, beta, x, b_half_sq, sgn, z_lo)
    lo = z_lo
    hi = z_hi
    z = 0.5 * (lo + hi)
    for i in range(200):
        v = _g0_general(s, dpow, beta, x, b_half_sq, sgn, z)
        if v > 0.0:
            hi = z
        elif v < 0.0:
            lo = z
        else:
            return z
        if hi - lo <= 1e-15 * (1.0 + fabs(z)):
            return 0.5 * (lo + hi)
        a = s * z
        c = a if a > b_half_sq else b_half_sq
        dp = fabs(s) * exp(a - c) * (dpow + beta * _cdf(z / x))
        if dp > 0.0:
            z_new = z - v / dp
        else:
            z_new = 0.5 * (lo + hi)
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if fabs(z_new - z) <= 1e-16 * (1.0 + fabs(z)):
            return z_new
        z = z_new
    return z


cdef double _log_benchmark(double rho, double beta, double delta, double x) nogil:
    if x == 0.0:
        return _log_benchmark_at_zero(rho, beta, delta)
    if beta == 0.0:
        return log(delta) + (1.0 - rho) * x * x / 2.0
    if rho == 1.0:
        return _solve_log_rho1(beta, delta, x)
    return _solve_log_general(rho, beta, delta, x)


cdef double _risk_tolerance(double rho, double beta, double delta, double x) nogil:
    cdef double z
    if x == 0.0 or beta == 0.0:
        return 1.0 / rho
    z = _log_benchmark(rho, beta, delta, x)
    return x / (rho * x + _penalty_slope(beta, z / x - (1.0 - rho) * x))


cdef double _inv_sq_tolerance(double rho, double beta, double delta, double v) nogil:
    cdef double x, z, r
    if v <= 0.0 or beta == 0.0:
        return rho * rho
    x = sqrt(v)
    z = _log_benchmark(rho, beta, delta, x)
    r = rho + _penalty_slope(beta, z / x - (1.0 - rho) * x) / x
    return r * r


def norm_cdf(double z):
    return _cdf(z)


def norm_pdf(double z):
    return _pdf(z)


def crra_log_benchmark(double rho, double beta, double delta, double x):
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    return _log_benchmark(rho, beta, delta, x)


def crra_risk_tolerance(double rho, double beta, double delta, double x):
    return _risk_tolerance(rho, beta, delta, x)


def crra_inv_sq_tolerance(double rho, double beta, double delta, double v):
    return _inv_sq_tolerance(rho, beta, delta, v)


def crra_risk_tolerance_many(double rho, double beta, double delta, xs):
    arr = np.ascontiguousarray(np.asarray(xs, dtype=np.float64).ravel())
    out = np.empty_like(arr)
    cdef double[::1] src = arr
    cdef double[::1] dst = out
    cdef Py_ssize_t i, n = src.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _risk_tolerance(rho, beta, delta, src[i])
    return out.reshape(np.shape(xs))


def crra_inv_sq_tolerance_many(double rho, double beta, double delta, vs):
    arr = np.ascontiguousarray(np.asarray(vs, dtype=np.float64).ravel())
    out = np.empty_like(arr)
    cdef double[::1] src = arr
    cdef double[::1] dst = out
    cdef Py_ssize_t i, n = src.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _inv_sq_tolerance(rho, beta, delta, src[i])
    return out.reshape(np.shape(vs))
