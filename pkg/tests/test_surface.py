import math
import warnings

import numpy as np
import pytest

from gdaport.preference import Empirical, GdaParams, LogNormal, Utility, gda_value
from gdaport.surface import (
    BoundaryError,
    ValueSurface,
    da_small_risk_slope,
    indifference_curve,
)

LOG = Utility.crra(1.0)

# pinned with a 30-digit mpmath solve of the value equation and the
# risk-tolerance quotient (independent of this package's quadrature)
M_AT_03 = 0.659840297045634327  # rho=1, beta=0.5, delta=0.9, x=0.3
CSTAR_HALF = -0.1616575067458544366369
CSTAR_ONE = -0.2760298047981432969669


def mixture_utility():
    """Non-CRRA concave utility: 0.5 log(w) - 0.5 / w."""
    return Utility(
        u=lambda w: 0.5 * np.log(w) - 0.5 / w,
        d1=lambda w: 0.5 / w + 0.5 / w**2,
        d2=lambda w: -0.5 / w**2 - 1.0 / w**3,
        d3=lambda w: 1.0 / w**3 + 3.0 / w**4,
        regularity=3,
        growth=4.0,
        description="log/inverse mixture",
    )


def test_offset_boundary_delta_below_one():
    for beta in (0.0, 0.5, 2.0):
        s = ValueSurface(LOG, GdaParams(beta, 0.9))
        assert s.log_benchmark_offset(0.0, 0.4) == pytest.approx(math.log(0.9), abs=1e-14)


def test_offset_boundary_log_closed_form():
    # for log utility and delta > 1 the boundary offset is log(delta)/(1+beta)
    s = ValueSurface(LOG, GdaParams(0.5, 1.2))
    got = s.log_benchmark_offset(0.0, 0.0)
    assert got == pytest.approx(math.log(1.2) / 1.5, abs=1e-13)
    assert 0.0 < got < math.log(1.2)


def test_offset_eu_reduction():
    # beta=0, log utility: value is exp(y - v/2), so the offset is log(delta)
    s = ValueSurface(LOG, GdaParams(0.0, 0.7))
    x, y = 0.3, 0.0
    assert s.log_benchmark_offset(x, y) == pytest.approx(math.log(0.7), abs=1e-12)
    g = s.value(x * x, y)
    assert g == pytest.approx(math.exp(y - x * x / 2), rel=1e-12)
    # consistency identity delta*g = exp(y - v/2 + offset)
    assert 0.7 * g == pytest.approx(
        math.exp(y - x * x / 2 + s.log_benchmark_offset(x, y)), rel=1e-12
    )


@pytest.mark.parametrize("beta,delta", [(0.5, 0.9), (0.5, 1.2), (0.7, 1.1), (0.5, 1.0)])
@pytest.mark.parametrize("v,y", [(0.09, 0.0), (0.25, 0.1), (0.01, -0.2)])
def test_value_matches_preference_module(beta, delta, v, y):
    # the surface solves in offset space; gda_value solves in value space
    s = ValueSurface(LOG, GdaParams(beta, delta))
    direct = gda_value(LOG, GdaParams(beta, delta), LogNormal(y - v / 2, v))
    assert s.value(v, y) == pytest.approx(direct, abs=1e-9)


@pytest.mark.parametrize("beta,delta", [(0.5, 0.9), (0.5, 1.2)])
def test_consistency_identity_on_grid(beta, delta):
    s = ValueSurface(LOG, GdaParams(beta, delta))
    for v in (1e-4, 1e-2, 0.09, 0.25, 1.0):
        for y in (-0.5, 0.0, 0.05, 0.5):
            g = s.value(v, y)
            z = s.log_benchmark_offset(math.sqrt(v), y)
            assert delta * g == pytest.approx(math.exp(y - v / 2 + z), rel=1e-10)


def test_grad_eu_is_flat():
    s = ValueSurface(LOG, GdaParams(0.0, 0.9))
    for x, y in [(0.2, 0.0), (0.7, 0.3), (1.5, -0.4)]:
        zx, zy = s.log_benchmark_offset_grad(x, y)
        assert abs(zx) < 1e-12
        assert abs(zy) < 1e-12


@pytest.mark.parametrize(
    "utility,params",
    [
        (LOG, GdaParams(0.5, 0.9)),
        (Utility.crra(2.0), GdaParams(0.5, 1.2)),
        (mixture_utility(), GdaParams(0.7, 0.8)),
    ],
)
def test_grad_forms_and_finite_differences(utility, params):
    s = ValueSurface(utility, params)
    h = 1e-5
    for x, y in [(0.3, 0.0), (0.6, 0.2), (1.0, -0.3)]:
        zx, zy = s.log_benchmark_offset_grad(x, y)
        zx_curv = s.log_benchmark_offset_dx_curvature(x, y)
        assert zx == pytest.approx(zx_curv, abs=1e-7)
        fdx = (s.log_benchmark_offset(x + h, y) - s.log_benchmark_offset(x - h, y)) / (2 * h)
        fdy = (s.log_benchmark_offset(x, y + h) - s.log_benchmark_offset(x, y - h)) / (2 * h)
        assert zx == pytest.approx(fdx, abs=1e-5)
        assert zy == pytest.approx(fdy, abs=1e-5)


def test_grad_vanishes_as_x_shrinks():
    # the offset is continuously differentiable up to x = 0 with flat slope
    s = ValueSurface(LOG, GdaParams(0.5, 0.9))
    slopes = [abs(s.log_benchmark_offset_grad(x, 0.0)[0]) for x in (0.2, 0.05, 0.01, 0.002)]
    assert all(a > b for a, b in zip(slopes, slopes[1:]))
    assert slopes[-1] < 5e-3


def test_value_partials_eu_log():
    s = ValueSurface(LOG, GdaParams(0.0, 1.0))
    g, gv, gy = s.value_partials(0.09, 0.05)
    assert g == pytest.approx(math.exp(0.05 - 0.045), rel=1e-12)
    assert gv == pytest.approx(-g / 2, rel=1e-10)
    assert gy == pytest.approx(g, rel=1e-10)


@pytest.mark.parametrize("rho", [1.0, 2.0, 4.0])
def test_partial_ratio_at_origin(rho):
    s = ValueSurface(Utility.crra(rho), GdaParams(0.5, 0.9))
    _, gv, gy = s.value_partials(0.0, 0.0)
    assert gy / gv == pytest.approx(-2.0 / rho, rel=1e-10)


@pytest.mark.parametrize(
    "utility,params",
    [(LOG, GdaParams(0.5, 0.9)), (mixture_utility(), GdaParams(0.5, 1.2))],
)
def test_value_partials_finite_differences(utility, params):
    s = ValueSurface(utility, params)
    v, y = 0.09, 0.05
    g, gv, gy = s.value_partials(v, y)
    h = 1e-5
    fdv = (s.value(v + h, y) - s.value(v - h, y)) / (2 * h)
    fdy = (s.value(v, y + h) - s.value(v, y - h)) / (2 * h)
    assert gv == pytest.approx(fdv, abs=1e-5)
    assert gy == pytest.approx(fdy, abs=1e-5)
    assert gv < 0.0 < gy


def test_value_partials_da_boundary_error():
    s = ValueSurface(LOG, GdaParams(0.5, 1.0))
    with pytest.raises(BoundaryError):
        s.value_partials(0.0, 0.0)
    with pytest.raises(BoundaryError):
        s.risk_tolerance(0.0, 0.0)


def test_sign_conditions_on_grid():
    # concave utility: value falls in risk, rises in return; x - dz/dx > 0
    s = ValueSurface(LOG, GdaParams(0.5, 1.1))
    for x in (0.25, 0.5, 1.0, 2.0):
        for y in (-1.0, 0.0, 1.0):
            zx, zy = s.log_benchmark_offset_grad(x, y)
            assert x - zx > 0.0
            _, gv, gy = s.value_partials(x * x, y)
            assert gv < 0.0
            assert gy > 0.0


@pytest.mark.parametrize("rho", [1.0, 3.0])
def test_risk_tolerance_eu_constant(rho):
    s = ValueSurface(Utility.crra(rho), GdaParams(0.0, 0.9))
    for x, y in [(0.0, 0.0), (0.3, 0.1), (1.0, -0.5)]:
        assert s.risk_tolerance(x, y) == pytest.approx(1.0 / rho, rel=1e-10)


def test_risk_tolerance_boundary_crra2():
    s = ValueSurface(Utility.crra(2.0), GdaParams(0.5, 0.9))
    assert s.risk_tolerance(0.0, 0.3) == pytest.approx(0.5, rel=1e-12)


def test_risk_tolerance_pinned_value():
    s = ValueSurface(LOG, GdaParams(0.5, 0.9))
    m = s.risk_tolerance(0.3, 0.0)
    assert m == pytest.approx(M_AT_03, abs=1e-8)
    assert m < 1.0  # strictly below the disappointment-free level 1/rho


def test_risk_tolerance_matches_gradient_form():
    for utility, params in [
        (LOG, GdaParams(0.5, 0.9)),
        (Utility.crra(2.0), GdaParams(0.5, 1.2)),
        (mixture_utility(), GdaParams(0.3, 0.8)),
    ]:
        s = ValueSurface(utility, params)
        for x, y in [(0.3, 0.0), (0.8, 0.2)]:
            m = s.risk_tolerance(x, y)
            zx, zy = s.log_benchmark_offset_grad(x, y)
            assert m == pytest.approx(x * (1.0 + zy) / (x - zx), abs=1e-8)
            _, gv, gy = s.value_partials(x * x, y)
            assert m == pytest.approx(-gy / (2.0 * gv), abs=1e-8)


def test_crra_homogeneity():
    s = ValueSurface(LOG, GdaParams(0.5, 0.9))
    for v in (0.04, 0.25):
        g0 = s.value(v, 0.0)
        for y in (-0.3, 0.2, 0.6):
            assert s.value(v, y) == pytest.approx(math.exp(y) * g0, rel=1e-9)
            assert s.risk_tolerance(math.sqrt(v), y) == pytest.approx(
                s.risk_tolerance(math.sqrt(v), 0.0), abs=1e-9
            )


def test_mrs_eu_log():
    s = ValueSurface(LOG, GdaParams(0.0, 1.0))
    for v, y in [(0.01, 0.0), (0.5, 0.3)]:
        assert s.mrs(v, y) == pytest.approx(0.5, rel=1e-10)


def test_mrs_inverse_u_shape_gda():
    s = ValueSurface(LOG, GdaParams(0.5, 0.9))
    vs = np.array([1e-4, 0.01, 0.05, 0.12, 0.3, 0.6, 1.0])
    mrs = np.array([s.mrs(v, 0.0) for v in vs])
    peak = mrs.argmax()
    assert 0 < peak < len(vs) - 1  # interior maximum
    assert mrs[peak] > 0.5  # rises above the EU level
    assert mrs[-1] < mrs[peak]  # then falls


def test_mrs_da_blows_up_like_inverse_sqrt_v():
    # delta=1: m(x, 0)/x -> -1/c*, so sqrt(v)*MRS -> -c*/2
    s = ValueSurface(LOG, GdaParams(0.5, 1.0))
    cstar = da_small_risk_slope(0.5)
    v = 1e-6
    scaled = math.sqrt(v) * s.mrs(v, 0.0)
    assert scaled == pytest.approx(-cstar / 2.0, rel=2e-2)
    # and the MRS itself is huge at small risk (first-order risk aversion)
    assert s.mrs(1e-6, 0.0) > 50.0


def test_da_value_asymptote():
    # (value(v,0) - 1)/sqrt(v) -> c* as v -> 0; the correction is O(sqrt(v)),
    # so Richardson over the 10x-separated points cancels it
    s = ValueSurface(LOG, GdaParams(0.5, 1.0))
    r4 = (s.value(1e-4, 0.0) - 1.0) / math.sqrt(1e-4)
    r6 = (s.value(1e-6, 0.0) - 1.0) / math.sqrt(1e-6)
    extrap = r6 + (r6 - r4) / 9.0  # slopes differ by sqrt(v) factors of 10...
    assert abs(r6 - CSTAR_HALF) < 1e-3
    assert abs(extrap - CSTAR_HALF) < 5e-4


def test_da_slope_pinned_and_residual():
    from gdaport.numerics import std_normal_cdf, std_normal_pdf

    for beta, want in [(0.5, CSTAR_HALF), (1.0, CSTAR_ONE)]:
        c = da_small_risk_slope(beta)
        assert c == pytest.approx(want, abs=1e-13)
        assert abs(c + beta * c * std_normal_cdf(c) + beta * std_normal_pdf(c)) <= 1e-12


def test_da_slope_monotone_in_beta():
    assert da_small_risk_slope(0.5) > da_small_risk_slope(1.0)


def test_da_slope_small_beta_linearizes():
    beta = 1e-12
    c = da_small_risk_slope(beta)
    assert c < 0.0
    assert c == pytest.approx(-beta * 0.3989422804014327, rel=1e-3)


def test_da_slope_beta_zero_flag():
    with pytest.warns(UserWarning):
        assert da_small_risk_slope(0.0) == 0.0


def test_indifference_curves_gda_above_eu():
    vs = np.array([0.0, 0.05, 0.15, 0.3, 0.6, 1.0])
    eu = indifference_curve(LOG, GdaParams(0.0, 1.0), vs)
    gda = indifference_curve(LOG, GdaParams(0.5, 0.9), vs)
    # both increase in cumulative risk; the disappointment-averse curve
    # demands more return at every positive risk level
    assert np.all(np.diff(eu[:, 1]) > 0)
    assert np.all(np.diff(gda[:, 1]) > 0)
    assert np.all(gda[1:, 1] > eu[1:, 1])
    # EU with log utility: y(v) = v/2 exactly, MRS constant 1/2
    assert eu[:, 1] == pytest.approx(vs / 2, abs=1e-9)
    assert eu[1:, 2] == pytest.approx(0.5, abs=1e-9)


def test_surface_cache_reuse():
    s = ValueSurface(LOG, GdaParams(0.5, 0.9))
    a = s.risk_tolerance(0.3, 0.0)
    b = s.risk_tolerance(0.3, 0.0)
    assert a == b
    assert len(s._cache) == 1


def test_empirical_distributions_not_accepted_by_surface():
    # the surface is lognormal-specific by construction; the preference module
    # handles empirical laws
    dist = Empirical(values=(0.9, 1.1), probs=(0.5, 0.5))
    assert gda_value(LOG, GdaParams(0.5, 0.9), dist) > 0.0
