"""Copula-based conditional tail-risk measures with GARCH-filtered margins.

The subpackages split the pipeline into stages: ``ingest`` reads price panels,
``marginal`` fits the univariate volatility models, ``copulas`` holds the
dependence families and their estimation, ``risk`` solves the conditional
measures, ``simulation`` and ``backtest`` run the validation studies, and
``cli`` wires everything into subcommands.  The names re-exported here cover
the common workflow.
"""

from .backtest import RollingConfig, ViolationReport, insample_rates, rolling_forecast
from .copulas import (
    ClaytonCopula,
    ComonotoneCopula,
    Copula,
    GaussianCopula,
    GumbelCopula,
    HacCopula,
    IndependenceCopula,
    StudentTCopula,
    SurvivalCopula,
    fit_ml,
)
from .distributions import SkewTParams, pit, skew_t_quantile
from .errors import ConfigError, DataError, FitError, SolverError, VcovarError
from .ingest import describe, kendall_matrix, load_prices, system_series, to_log_returns
from .marginal import ArmaGarchSpec, FittedMarginal, fit, forecast_one_step, refilter, select_model, var_path
from .risk import (
    MEASURES,
    ProbLevels,
    RiskSeries,
    covar_u,
    limit_u,
    mcovar_u,
    risk_series,
    scovar,
    solve_u,
    vcovar_u,
)
from .simulation import (
    SweepConfig,
    ValidationConfig,
    copula_from_tau,
    dependence_curve,
    hac_surface,
    validate_violation_rate,
)

__version__ = "0.1.0"

__all__ = [
    "ArmaGarchSpec",
    "ClaytonCopula",
    "ComonotoneCopula",
    "ConfigError",
    "Copula",
    "DataError",
    "FitError",
    "FittedMarginal",
    "GaussianCopula",
    "GumbelCopula",
    "HacCopula",
    "IndependenceCopula",
    "MEASURES",
    "ProbLevels",
    "RiskSeries",
    "RollingConfig",
    "SkewTParams",
    "SolverError",
    "StudentTCopula",
    "SurvivalCopula",
    "SweepConfig",
    "ValidationConfig",
    "VcovarError",
    "ViolationReport",
    "copula_from_tau",
    "covar_u",
    "dependence_curve",
    "describe",
    "fit",
    "fit_ml",
    "forecast_one_step",
    "hac_surface",
    "insample_rates",
    "kendall_matrix",
    "limit_u",
    "load_prices",
    "mcovar_u",
    "pit",
    "refilter",
    "risk_series",
    "rolling_forecast",
    "scovar",
    "select_model",
    "skew_t_quantile",
    "solve_u",
    "system_series",
    "to_log_returns",
    "validate_violation_rate",
    "var_path",
    "vcovar_u",
    "__version__",
]
