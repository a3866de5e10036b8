"""Equilibrium portfolio selection under generalized disappointment aversion.

Preferences value an outcome through a disappointment-penalized fixed
point; in a market with deterministic coefficients the time-consistent
(intra-personal equilibrium) strategy solves a nonlinear integral equation
driven by the preference's risk-tolerance multiplier.  The package provides
the preference layer (values, certainty equivalents), the lognormal value
surface with analytic partials, a general backward Picard solver, a
semi-analytic CRRA pipeline with a horizon-dependent risk-aversion variant,
a Monte-Carlo / spike-perturbation verification harness, and a CLI.
"""

__version__ = "0.1.0"

from .preference import (
    Empirical,
    GdaParams,
    LogNormal,
    Utility,
    certainty_equivalent,
    gda_value,
    sure_value,
    sure_value_inverse,
)
from .surface import (
    BoundaryError,
    ValueSurface,
    da_small_risk_slope,
    indifference_curve,
)
from .market import MarketModel, SolverConfig, StrategyPath, market_price_of_risk
from .equilibrium import (
    equilibrium_residual,
    solve_equilibrium,
    solve_equilibrium_da,
)
from .crra import (
    CrraSpec,
    HdraSpec,
    equilibrium_path,
    hdra_equilibrium_path,
    risk_budget,
    risk_tolerance,
    variance_from_risk_budget,
)
from .verify import (
    McConfig,
    PerturbationSpec,
    certify_equilibrium,
    mc_gda_value,
    perturbation_test,
    simulate_wealth,
)

__all__ = [
    "BoundaryError",
    "CrraSpec",
    "Empirical",
    "GdaParams",
    "HdraSpec",
    "LogNormal",
    "MarketModel",
    "McConfig",
    "PerturbationSpec",
    "SolverConfig",
    "StrategyPath",
    "Utility",
    "ValueSurface",
    "certainty_equivalent",
    "certify_equilibrium",
    "da_small_risk_slope",
    "equilibrium_path",
    "equilibrium_residual",
    "gda_value",
    "hdra_equilibrium_path",
    "indifference_curve",
    "market_price_of_risk",
    "mc_gda_value",
    "perturbation_test",
    "risk_budget",
    "risk_tolerance",
    "simulate_wealth",
    "solve_equilibrium",
    "solve_equilibrium_da",
    "sure_value",
    "sure_value_inverse",
    "variance_from_risk_budget",
]
