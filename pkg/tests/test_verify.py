import math

import numpy as np
import pytest

from gdaport.equilibrium import solve_equilibrium, solve_equilibrium_da
from gdaport.market import MarketModel, StrategyPath
from gdaport.preference import GdaParams, LogNormal, Utility, gda_value
from gdaport.surface import da_small_risk_slope
from gdaport.verify import (
    McConfig,
    PerturbationSpec,
    certify_equilibrium,
    mc_gda_value,
    perturbation_test,
    simulate_wealth,
    spike_directions,
)

LOG = Utility.crra(1.0)
BS = MarketModel.constant(0.06, 0.3, 3.0)


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(n_paths=0, seed=1)
    with pytest.raises(ValueError):
        McConfig(n_paths=100, seed=1, n_batches=1)


def test_perturbation_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(t=0.0, k=(1.0,), epsilons=(1e-4, 1e-2))
    with pytest.raises(ValueError):
        PerturbationSpec(t=0.0, k=(float("inf"),))


def test_mc_eu_closed_form():
    dist = LogNormal(mean_log=0.06 - 0.045, var_log=0.09)
    est, se = mc_gda_value(LOG, GdaParams(0.0, 1.0), dist, McConfig(n_paths=1_000_000, seed=11))
    assert abs(est - math.exp(0.015)) <= 3 * se
    assert se < 1e-3


def test_mc_deterministic_distribution():
    dist = LogNormal(mean_log=0.2, var_log=0.0)
    est, se = mc_gda_value(LOG, GdaParams(0.5, 0.9), dist, McConfig(n_paths=100, seed=1))
    assert est == pytest.approx(math.exp(0.2), rel=1e-12)
    assert se == 0.0


def test_mc_seeded_determinism():
    dist = LogNormal(mean_log=0.0, var_log=0.04)
    cfg = McConfig(n_paths=20_000, seed=321)
    a = mc_gda_value(LOG, GdaParams(0.5, 0.9), dist, cfg)
    b = mc_gda_value(LOG, GdaParams(0.5, 0.9), dist, cfg)
    assert a == b


def test_mc_brackets_quadrature_value():
    dist = LogNormal(mean_log=0.015, var_log=0.09)
    params = GdaParams(0.5, 0.9)
    est, se = mc_gda_value(LOG, params, dist, McConfig(n_paths=1_000_000, seed=99))
    quad = gda_value(LOG, params, dist)
    assert abs(est - quad) <= 3 * se


def test_simulate_wealth_zero_strategy():
    path = solve_equilibrium_da(LOG, GdaParams(0.5, 1.0), BS)
    w = simulate_wealth(BS, path, 0.0, McConfig(n_paths=500, seed=5))
    assert np.all(w == 1.0)


def test_simulate_wealth_constant_weights():
    # constant pi: log(W_T/W_0) has variance pi^2 sigma^2 T
    path = solve_equilibrium(LOG, GdaParams(0.0, 0.9), BS)  # pi = 2/3
    w = simulate_wealth(BS, path, 0.0, McConfig(n_paths=200_000, seed=17))
    lw = np.log(w)
    var_want = (2.0 / 3.0) ** 2 * 0.09 * 3.0
    se_var = var_want * math.sqrt(2.0 / (w.size - 1))
    assert abs(lw.var(ddof=1) - var_want) <= 3 * se_var


def test_simulate_wealth_matches_path_cumulative_law():
    params = GdaParams(0.5, 0.9)
    path = solve_equilibrium(LOG, params, BS)
    t0 = 1.5
    w = simulate_wealth(BS, path, t0, McConfig(n_paths=200_000, seed=23))
    lw = np.log(w)
    want = float(np.interp(t0, path.grid, path.y) - np.interp(t0, path.grid, path.v) / 2.0)
    se = lw.std(ddof=1) / math.sqrt(w.size)
    assert abs(lw.mean() - want) <= 3 * se


def test_simulate_wealth_seeded_determinism():
    path = solve_equilibrium(LOG, GdaParams(0.0, 0.9), BS)
    cfg = McConfig(n_paths=1000, seed=8)
    w1 = simulate_wealth(BS, path, 0.0, cfg)
    w2 = simulate_wealth(BS, path, 0.0, cfg)
    assert np.array_equal(w1, w2)


@pytest.fixture(scope="module")
def merton_path():
    return solve_equilibrium(LOG, GdaParams(0.0, 0.9), BS)


@pytest.fixture(scope="module")
def gda_path():
    return solve_equilibrium(LOG, GdaParams(0.5, 0.9), BS)


def test_merton_passes_certification(merton_path):
    report = certify_equilibrium(LOG, GdaParams(0.0, 0.9), BS, merton_path)
    assert report.passed
    assert len(report.results) == 32  # 4 times x 8 directions
    assert max(r.extrapolated for r in report.results) <= 1e-6
    # strict optimum: second-order (quadratic) response is negative
    assert all(r.extrapolated < 0.0 for r in report.results)


def test_gda_equilibrium_passes_certification(gda_path):
    report = certify_equilibrium(LOG, GdaParams(0.5, 0.9), BS, gda_path)
    assert report.passed


def test_scaled_path_fails_certification(gda_path):
    params = GdaParams(0.5, 0.9)
    scaled = StrategyPath(
        grid=gda_path.grid,
        a=gda_path.a * 1.1,
        pi=gda_path.pi * 1.1,
        v=gda_path.v * 1.21,
        y=gda_path.y * 1.1,
        m=gda_path.m,
        residual=None,
    )
    report = certify_equilibrium(LOG, params, BS, scaled)
    assert not report.passed
    assert max(r.extrapolated for r in report.results) > 1e-5


def test_non_equilibrium_rejected(merton_path):
    # the Merton path is not an equilibrium under disappointment aversion
    report = certify_equilibrium(LOG, GdaParams(0.5, 0.9), BS, merton_path)
    assert not report.passed
    assert max(r.extrapolated for r in report.results) > 1e-3


def test_da_sqrt_epsilon_law():
    params = GdaParams(0.5, 1.0)
    zero = solve_equilibrium_da(LOG, params, BS)
    cstar = da_small_risk_slope(0.5)
    for t in (0.0, 1.5):
        for k in (1.0, 0.7):
            rep = perturbation_test(
                LOG, params, BS, zero, PerturbationSpec(t=t, k=(k,))
            )
            r = rep.results[0]
            assert r.mode == "sqrt"
            assert r.passed
            assert r.extrapolated == pytest.approx(0.3 * abs(k) * cstar, abs=1e-3)
            assert r.extrapolated < 0.0


def test_spike_directions_basket():
    basket = spike_directions(BS, 0.0)
    assert len(basket) == 8
    # paired directions come with both signs
    assert np.allclose(basket[0], -np.asarray(basket[1]))
    assert np.allclose(basket[6], -np.asarray(basket[7]))


def test_report_table_columns(merton_path):
    report = certify_equilibrium(LOG, GdaParams(0.0, 0.9), BS, merton_path, times=[0.0])
    table = report.table()
    assert list(table) == ["t", "k_index", "first_order_coeff", "pass"]
    assert table["t"].size == 8
