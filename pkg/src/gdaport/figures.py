"""One-command reproduction of the published numerical experiments.

Every preset uses the single-stock market with drift 0.06, volatility 0.3,
horizon 3, and log utility: indifference curves and marginal rates of
substitution (fig1, fig2), equilibrium paths across the benchmark
adjustment delta (fig3a, fig3b) and the disappointment weight beta (fig4a,
fig4b), and the horizon-dependent risk-aversion variants (fig5a, fig5b).
Output is CSV only; plotting is left to the caller.
"""

from __future__ import annotations

import numpy as np

from .crra import CrraSpec, HdraSpec, equilibrium_path, hdra_equilibrium_path
from .market import MarketModel, SolverConfig
from .preference import GdaParams, Utility
from .surface import indifference_curve

PAPER_MARKET = dict(mu=0.06, sigma=0.3, horizon=3.0)
RHO = 1.0

_CURVE_V_GRID = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, 30)])


def _market() -> MarketModel:
    return MarketModel.constant(**PAPER_MARKET)


def _curve_series(beta: float, delta: float) -> dict:
    rows = indifference_curve(Utility.crra(RHO), GdaParams(beta, delta), _CURVE_V_GRID)
    return {"v": rows[:, 0], "y_on_curve": rows[:, 1], "mrs": rows[:, 2]}


def _path_series(path) -> dict:
    return {"t": path.grid, "pi": path.pi[:, 0]}


def fig1() -> dict:
    """Indifference curves and MRS: GDA (0.5, 1.1), GDA (0.5, 0.9), EU."""
    return {
        "fig1_gda_delta_1.1": _curve_series(0.5, 1.1),
        "fig1_gda_delta_0.9": _curve_series(0.5, 0.9),
        "fig1_eu": _curve_series(0.0, 1.0),
    }


def fig2() -> dict:
    """Indifference curves and MRS: DA (0.5, 1) against EU."""
    return {
        "fig2_da": _curve_series(0.5, 1.0),
        "fig2_eu": _curve_series(0.0, 1.0),
    }


def _delta_sweep(deltas, beta: float, label: str) -> dict:
    market = _market()
    out = {}
    for delta in deltas:
        path = equilibrium_path(CrraSpec(RHO, beta, delta), market)
        out[f"{label}_delta_{delta:g}"] = _path_series(path)
    return out


def _beta_sweep(betas, delta: float, label: str) -> dict:
    market = _market()
    out = {}
    for beta in betas:
        path = equilibrium_path(CrraSpec(RHO, beta, delta), market)
        out[f"{label}_beta_{beta:g}"] = _path_series(path)
    return out


def fig3a() -> dict:
    return _delta_sweep((0.7, 0.8, 0.9), 0.5, "fig3a")


def fig3b() -> dict:
    return _delta_sweep((1.1, 1.2, 1.3), 0.5, "fig3b")


def fig4a() -> dict:
    return _beta_sweep((0.5, 0.6, 0.7), 0.9, "fig4a")


def fig4b() -> dict:
    return _beta_sweep((0.5, 0.6, 0.7), 1.1, "fig4b")


def _hdra_panel(slope: float, label: str) -> dict:
    market = _market()
    hdra = HdraSpec.affine(1.0, slope)
    cfg = SolverConfig()
    out = {}
    for beta in (0.0, 0.5):
        path = hdra_equilibrium_path(hdra, GdaParams(beta, 0.9), market, cfg)
        out[f"{label}_beta_{beta:g}"] = _path_series(path)
    return out


def fig5a() -> dict:
    return _hdra_panel(0.5, "fig5a")


def fig5b() -> dict:
    return _hdra_panel(2.0, "fig5b")


PRESETS = {
    "fig1": fig1,
    "fig2": fig2,
    "fig3a": fig3a,
    "fig3b": fig3b,
    "fig4a": fig4a,
    "fig4b": fig4b,
    "fig5a": fig5a,
    "fig5b": fig5b,
}


def run_preset(name: str) -> dict:
    try:
        maker = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return maker()
