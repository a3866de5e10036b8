import math

import numpy as np
import pytest

from gdaport.preference import (
    Empirical,
    GdaParams,
    LogNormal,
    Utility,
    certainty_equivalent,
    gda_value,
    sure_value,
    sure_value_inverse,
)

LOG = Utility.crra(1.0)


def lognormal_from_cumulative(y, v):
    """Law of the gross return with cumulative return y and cumulative risk v."""
    return LogNormal(mean_log=y - v / 2.0, var_log=v)


def test_utility_validation():
    with pytest.raises(ValueError):
        Utility.crra(-1.0)
    with pytest.raises(ValueError):
        Utility(u=lambda w: -w, d1=lambda w: -np.ones_like(w))


def test_utility_invert_roundtrip():
    u = Utility.crra(2.0)
    for w in (0.3, 1.0, 4.5):
        assert u.invert(float(u.u(w))) == pytest.approx(w, rel=1e-12)


def test_custom_utility_invert_without_closed_form():
    u = Utility(
        u=lambda w: np.log(w) + 0.1 * np.sqrt(w),
        d1=lambda w: 1.0 / w + 0.05 / np.sqrt(w),
        description="log plus sqrt kicker",
    )
    assert abs(float(u.u(u.invert(0.7))) - 0.7) < 1e-10


def test_gda_params_validation():
    with pytest.raises(ValueError):
        GdaParams(beta=-0.1, delta=1.0)
    with pytest.raises(ValueError):
        GdaParams(beta=0.0, delta=0.0)


def test_empirical_validation():
    with pytest.raises(ValueError):
        Empirical(values=(1.0, 2.0), probs=(0.6, 0.5))
    with pytest.raises(ValueError):
        Empirical(values=(-1.0, 2.0), probs=(0.5, 0.5))


def test_gda_value_eu_log_utility():
    dist = LogNormal(mean_log=-0.045, var_log=0.09)
    got = gda_value(LOG, GdaParams(beta=0.0, delta=1.0), dist)
    assert got == pytest.approx(math.exp(-0.045), rel=1e-12)


def test_gda_value_eu_crra2():
    # eta = exp(y - rho*v/2) under EU with CRRA
    dist = lognormal_from_cumulative(y=0.06, v=0.09)
    got = gda_value(Utility.crra(2.0), GdaParams(beta=0.0, delta=1.0), dist)
    assert got == pytest.approx(math.exp(-0.03), rel=1e-11)


@pytest.mark.parametrize("delta", [0.5, 0.9, 1.0])
def test_gda_value_of_sure_outcome(delta):
    dist = Empirical(values=(1.7,), probs=(1.0,))
    got = gda_value(LOG, GdaParams(beta=0.5, delta=delta), dist)
    assert got == pytest.approx(1.7, abs=1e-12)


def test_gda_value_against_monte_carlo_fixed_point():
    params = GdaParams(beta=0.5, delta=0.9)
    dist = LogNormal(mean_log=-0.045, var_log=0.09)
    got = gda_value(LOG, params, dist)

    rng = np.random.default_rng(991)
    y = np.exp(dist.mean_log + dist.sd_log * rng.standard_normal(1_000_000))
    uy = np.log(y)

    def residual(p):
        return math.log(p) - uy.mean() + 0.5 * np.maximum(math.log(0.9 * p) - uy, 0.0).mean()

    lo, hi = 0.5, 1.5
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0:
            hi = mid
        else:
            lo = mid
    mc = 0.5 * (lo + hi)
    # crude std error of the MC fixed point via batch means
    batches = []
    for chunk in np.split(uy, 20):
        lo_, hi_ = 0.5, 1.5
        for _ in range(60):
            mid = 0.5 * (lo_ + hi_)
            val = math.log(mid) - chunk.mean() + 0.5 * np.maximum(math.log(0.9 * mid) - chunk, 0.0).mean()
            if val > 0:
                hi_ = mid
            else:
                lo_ = mid
        batches.append(0.5 * (lo_ + hi_))
    se = np.std(batches, ddof=1) / math.sqrt(len(batches))
    assert abs(got - mc) <= 3 * se


def test_gda_value_fixed_point_residual():
    params = GdaParams(beta=0.7, delta=1.1)
    dist = lognormal_from_cumulative(y=0.1, v=0.2)
    u = Utility.crra(2.0)
    eta = gda_value(u, params, dist)
    from gdaport.preference import _expect, _expect_below, _prob_below

    bench = params.delta * eta
    lhs = float(u.u(eta))
    rhs = _expect(dist, u.u) - params.beta * (
        float(u.u(bench)) * _prob_below(dist, bench) - _expect_below(dist, u.u, bench)
    )
    assert abs(lhs - rhs) <= 1e-9 * (1.0 + abs(lhs))


def test_gda_value_monotone_in_dominance():
    params = GdaParams(beta=0.5, delta=0.9)
    base = Empirical(values=(0.5, 0.9, 1.1, 1.6, 2.2), probs=(0.1, 0.2, 0.4, 0.2, 0.1))
    shifted = Empirical(values=tuple(v * 1.05 for v in base.values), probs=base.probs)
    assert gda_value(LOG, params, shifted) > gda_value(LOG, params, base)


def test_sure_value_log_closed_form():
    # psi(1) = delta**(-beta/(1+beta)) for log utility
    got = sure_value(LOG, GdaParams(beta=0.5, delta=1.2), 1.0)
    assert got == pytest.approx(1.2 ** (-1.0 / 3.0), rel=1e-12)
    assert got < 1.0


def test_sure_value_beta_zero():
    assert sure_value(LOG, GdaParams(beta=0.0, delta=1.5), 2.7) == 2.7


def test_sure_value_crra2_closed_form():
    # for rho=2: s = w (1 + beta/delta) / (1 + beta)
    got = sure_value(Utility.crra(2.0), GdaParams(beta=0.5, delta=1.1), 2.0)
    want = 2.0 * (1.0 + 0.5 / 1.1) / 1.5
    assert got == pytest.approx(want, rel=1e-12)


def test_sure_value_requires_delta_above_one():
    with pytest.raises(ValueError):
        sure_value(LOG, GdaParams(beta=0.5, delta=0.9), 1.0)
    with pytest.raises(ValueError):
        sure_value_inverse(LOG, GdaParams(beta=0.5, delta=1.0), 1.0)


def test_sure_value_inverse_log_closed_form():
    got = sure_value_inverse(LOG, GdaParams(beta=0.5, delta=1.2), 1.0)
    assert got == pytest.approx(1.2 ** (1.0 / 3.0), rel=1e-12)


def test_sure_value_inverse_beta_zero():
    assert sure_value_inverse(LOG, GdaParams(beta=0.0, delta=1.5), 0.8) == pytest.approx(0.8)


def test_sure_value_roundtrip():
    u = Utility.crra(2.0)
    params = GdaParams(beta=0.5, delta=1.1)
    s = sure_value(u, params, 2.0)
    assert sure_value_inverse(u, params, s) == pytest.approx(2.0, abs=1e-10)


def test_certainty_equivalent_of_sure_outcome():
    dist = Empirical(values=(3.0,), probs=(1.0,))
    got = certainty_equivalent(LOG, GdaParams(beta=0.5, delta=1.2), dist)
    assert got == pytest.approx(3.0, rel=1e-12)


def test_certainty_equivalent_matches_value_below_one():
    params = GdaParams(beta=0.5, delta=0.9)
    for dist in (
        lognormal_from_cumulative(0.06, 0.09),
        Empirical(values=(0.8, 1.0, 1.3), probs=(0.3, 0.4, 0.3)),
    ):
        assert certainty_equivalent(LOG, params, dist) == gda_value(LOG, params, dist)


@pytest.mark.parametrize("delta", [0.8, 1.0, 1.4])
def test_certainty_equivalent_eu_reduction(delta):
    dist = lognormal_from_cumulative(0.05, 0.04)
    params = GdaParams(beta=0.0, delta=delta)
    got = certainty_equivalent(Utility.crra(2.0), params, dist)
    assert got == pytest.approx(math.exp(0.05 - 0.04), rel=1e-11)


def _test_grid():
    lognormals = [
        lognormal_from_cumulative(y, v)
        for (y, v) in [(0.06, 0.09), (0.0, 0.04), (-0.05, 0.16), (0.12, 0.25), (0.03, 0.01), (0.0, 0.5)]
    ]
    empiricals = [
        Empirical(values=(0.7, 0.9, 1.0, 1.2, 1.5), probs=(0.15, 0.2, 0.3, 0.2, 0.15)),
        Empirical(values=(0.5, 1.0, 2.0), probs=(0.25, 0.5, 0.25)),
        Empirical(values=(0.9, 1.1), probs=(0.5, 0.5)),
        Empirical(values=(0.4, 0.8, 1.6, 3.2), probs=(0.1, 0.4, 0.4, 0.1)),
        Empirical(values=(1.0, 1.5, 0.6, 2.4, 0.3), probs=(0.3, 0.2, 0.2, 0.15, 0.15)),
        Empirical(values=(0.95, 1.05, 1.25), probs=(0.4, 0.4, 0.2)),
    ]
    return lognormals + empiricals


@pytest.mark.parametrize("utility", [Utility.crra(1.0), Utility.crra(2.0)])
def test_ce_decreasing_in_delta_below_one(utility):
    beta = 0.5
    deltas = [0.3, 0.6, 0.8, 1.0]
    for dist in _test_grid():
        ces = [certainty_equivalent(utility, GdaParams(beta, d), dist) for d in deltas]
        for a, b in zip(ces, ces[1:]):
            assert a >= b - 1e-10


@pytest.mark.parametrize("utility", [Utility.crra(1.0), Utility.crra(2.0)])
def test_ce_increasing_in_delta_above_one(utility):
    beta = 0.5
    deltas = [1.0, 1.1, 1.5, 2.0]
    for dist in _test_grid():
        ces = [certainty_equivalent(utility, GdaParams(beta, d), dist) for d in deltas]
        for a, b in zip(ces, ces[1:]):
            assert a <= b + 1e-10


@pytest.mark.parametrize("delta", [0.8, 1.0, 1.3])
def test_ce_decreasing_in_beta(delta):
    betas = [0.1, 0.5, 1.0, 2.0]
    for dist in _test_grid():
        ces = [certainty_equivalent(LOG, GdaParams(b, delta), dist) for b in betas]
        for a, b in zip(ces, ces[1:]):
            assert a >= b - 1e-10


def test_affine_invariance():
    base = Utility.crra(2.0)
    affine = Utility(
        u=lambda w: 3.0 * base.u(w) + 1.7,
        d1=lambda w: 3.0 * base.d1(w),
        d2=lambda w: 3.0 * base.d2(w),
        regularity=2,
        growth=base.growth,
        description="affine transform of CRRA(2)",
    )
    for params in (GdaParams(0.5, 0.9), GdaParams(0.5, 1.2), GdaParams(0.0, 1.0)):
        for dist in (
            lognormal_from_cumulative(0.06, 0.09),
            Empirical(values=(0.6, 1.0, 1.9), probs=(0.3, 0.4, 0.3)),
        ):
            a = certainty_equivalent(base, params, dist)
            b = certainty_equivalent(affine, params, dist)
            assert abs(a - b) <= 1e-9 * (1.0 + abs(a))
