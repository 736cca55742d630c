"""Dependence sweeps and sampling-based validation of the measure solvers.

Two kinds of studies:

* curves and surfaces of each measure against rank correlation, with a fixed
  standard-normal margin so values are comparable across families;
* a violation-rate study that samples from a known copula, refits the assumed
  family, solves the measure, and counts how often the target coordinate
  breaches the solved level among condition-satisfying draws.  The average
  rate over replications should sit at the target tail probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .copulas.families import (
    ClaytonCopula,
    Copula,
    GaussianCopula,
    GumbelCopula,
    StudentTCopula,
)
from .copulas.fitting import fit_ml
from .copulas.hac import HacCopula
from .distributions import normal_quantile
from .errors import DataError, FitError
from .risk import MEASURES, ProbLevels, solve_u

__all__ = [
    "DEFAULT_TAU_GRID",
    "SweepConfig",
    "ValidationConfig",
    "copula_from_tau",
    "dependence_curve",
    "hac_surface",
    "validate_violation_rate",
]

# 37 points spanning the plottable range; the open endpoints avoid the
# degenerate limits where parameter conversions blow up
DEFAULT_TAU_GRID = tuple(np.round(np.linspace(0.025, 0.925, 37), 6))

_FRAILTY_FAMILIES = ("clayton", "gumbel")
_SWEEP_FAMILIES = _FRAILTY_FAMILIES + ("gaussian", "student_t")


def copula_from_tau(family: str, tau: float, dim: int = 2, shape: float = 4.0) -> Copula:
    """Build a copula of the given family at a rank-correlation level."""
    if not 0.0 < tau < 1.0:
        raise DataError(f"tau must lie strictly inside (0, 1), got {tau}")
    family = family.lower()
    if family == "clayton":
        return ClaytonCopula.from_tau(tau, dim)
    if family == "gumbel":
        return GumbelCopula.from_tau(tau, dim)
    rho = math.sin(0.5 * math.pi * tau)
    corr = np.full((dim, dim), rho) + (1.0 - rho) * np.eye(dim)
    if family == "gaussian":
        return GaussianCopula(corr, dim)
    if family == "student_t":
        return StudentTCopula(corr, shape, dim)
    raise DataError(f"family must be one of {_SWEEP_FAMILIES}, got {family!r}")


def _sweep_copula(measure: str, cop: Copula, family: str) -> Copula:
    # the union measure is built from survival functions, so the named family
    # describes the rotated copula; elliptical families are radially symmetric
    # and the rotation would be a distributional no-op
    if measure == "VCoVaR" and family.lower() in _FRAILTY_FAMILIES:
        return cop.rotate180()
    return cop


@dataclass(frozen=True)
class SweepConfig:
    """Curve study: one measure, one family, a rank-correlation grid, and the
    fixed standard-normal margin."""

    measure: str
    family: str
    tau_grid: tuple = DEFAULT_TAU_GRID
    levels: ProbLevels = field(default_factory=ProbLevels)
    shape: float = 4.0

    def __post_init__(self):
        if self.measure not in MEASURES or self.measure == "VaR":
            raise DataError(f"measure must be a conditional measure, got {self.measure!r}")
        grid = tuple(float(t) for t in self.tau_grid)
        if not grid or not all(0.0 < t < 1.0 for t in grid):
            raise DataError("tau grid must be nonempty and strictly inside (0, 1)")
        object.__setattr__(self, "tau_grid", grid)
        if self.family.lower() not in _SWEEP_FAMILIES:
            raise DataError(f"family must be one of {_SWEEP_FAMILIES}, got {self.family!r}")
        if self.measure in ("MCoVaR", "VCoVaR") and self.family.lower() not in _FRAILTY_FAMILIES:
            raise DataError("joint and union sweeps support clayton and gumbel only")


def dependence_curve(config: SweepConfig):
    """Measure values across the rank-correlation grid, standard-normal margin.

    Returns a table with one row per grid point plus the two constant limit
    columns (no-dependence and full-dependence values).
    """
    import pandas as pd

    lv = config.levels
    dim = 2 if config.measure in ("CoVaR", "SCoVaR") else 3
    u_roots = []
    for tau in config.tau_grid:
        cop = copula_from_tau(config.family, tau, dim, config.shape)
        u_roots.append(solve_u(config.measure, _sweep_copula(config.measure, cop, config.family), lv))
    u_roots = np.array(u_roots)
    return pd.DataFrame(
        {
            "measure": config.measure,
            "family": config.family,
            "tau": np.array(config.tau_grid),
            "alpha": lv.alpha,
            "beta": lv.beta,
            "u": u_roots,
            "value": normal_quantile(u_roots),
            "limit_independence": float(normal_quantile(lv.beta)),
            "limit_comonotone": float(normal_quantile(lv.alpha * lv.beta)),
        }
    )


def hac_surface(
    measure: str,
    outer_family: str,
    inner_family: str,
    tau1_grid,
    tau2_grid,
    levels: ProbLevels | None = None,
):
    """Measure values over a grid of (outer, inner) rank correlations for the
    nested three-dimensional copula.

    Cells violating the nesting requirement (outer dependence exceeding inner)
    are kept in the table with a missing value and valid=False.
    """
    import pandas as pd

    if measure not in ("MCoVaR", "VCoVaR"):
        raise DataError(f"surfaces are defined for MCoVaR and VCoVaR, got {measure!r}")
    if outer_family.lower() not in _FRAILTY_FAMILIES or inner_family.lower() not in _FRAILTY_FAMILIES:
        raise DataError(f"surface families must be in {_FRAILTY_FAMILIES}")
    lv = levels if levels is not None else ProbLevels()
    rows = []
    for tau1 in tau1_grid:
        for tau2 in tau2_grid:
            tau1 = float(tau1)
            tau2 = float(tau2)
            if not (0.0 < tau1 < 1.0 and 0.0 < tau2 < 1.0):
                raise DataError("surface grids must lie strictly inside (0, 1)")
            valid = tau1 <= tau2 + 1e-12
            if valid:
                cop = HacCopula.from_taus(outer_family, tau1, inner_family, tau2, 2)
                u = solve_u(measure, _sweep_copula(measure, cop, outer_family), lv)
                value = float(normal_quantile(u))
            else:
                u = math.nan
                value = math.nan
            rows.append((tau1, tau2, valid, u, value))
    frame = pd.DataFrame(rows, columns=["tau_outer", "tau_inner", "valid", "u", "value"])
    frame.insert(0, "measure", measure)
    frame.insert(1, "outer_family", outer_family)
    frame.insert(2, "inner_family", inner_family)
    frame["alpha"] = lv.alpha
    frame["beta"] = lv.beta
    return frame


@dataclass(frozen=True)
class ValidationConfig:
    """Sample-refit-solve study for one measure/family/dependence cell."""

    measure: str
    family: str
    tau: float
    levels: ProbLevels = field(default_factory=ProbLevels)
    sample_size: int = 10_000
    reps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.measure not in MEASURES or self.measure == "VaR":
            raise DataError(f"measure must be a conditional measure, got {self.measure!r}")
        if self.family.lower() not in _SWEEP_FAMILIES:
            raise DataError(f"family must be one of {_SWEEP_FAMILIES}, got {self.family!r}")
        if not 0.0 < self.tau < 1.0:
            raise DataError(f"tau must lie strictly inside (0, 1), got {self.tau}")
        if self.sample_size < 100:
            raise DataError(f"sample_size must be >= 100, got {self.sample_size}")
        if self.reps < 1:
            raise DataError(f"reps must be >= 1, got {self.reps}")


def _condition_mask(measure: str, sample: np.ndarray, alpha: float) -> np.ndarray:
    # conditioning thresholds are the empirical lower quantiles per coordinate
    thresholds = np.quantile(sample[:, 1:], alpha, axis=0, method="inverted_cdf")
    hits = sample[:, 1:] <= thresholds
    if measure in ("CoVaR", "SCoVaR"):
        return hits[:, 0]
    if measure == "MCoVaR":
        return hits.all(axis=1)
    return hits.any(axis=1)


def validate_violation_rate(config: ValidationConfig) -> float:
    """Average violation rate over replications.

    Each replication samples the true copula, refits the same family by ML,
    solves the measure on the fitted copula, and evaluates the violation
    frequency among the condition-satisfying draws.  Margins are uniform, so
    everything happens on the copula scale.  Replications whose ML fit fails
    are skipped; more than 10% skipped aborts the study.
    """
    dim = 2 if config.measure in ("CoVaR", "SCoVaR") else 3
    rotated = config.measure == "VCoVaR" and config.family.lower() in _FRAILTY_FAMILIES
    true_copula = _sweep_copula(config.measure, copula_from_tau(config.family, config.tau, dim), config.family)
    streams = np.random.SeedSequence(config.seed).spawn(config.reps)
    rates = []
    skipped = 0
    for stream in streams:
        rng = np.random.default_rng(stream)
        sample = true_copula.sample(config.sample_size, rng)
        try:
            # the assumed family names the rotated copula in the union study,
            # so the likelihood sees the flipped sample and the fit is flipped back
            if rotated:
                fitted = fit_ml(1.0 - sample, config.family).copula.rotate180()
            else:
                fitted = fit_ml(sample, config.family).copula
        except FitError:
            skipped += 1
            continue
        u_root = solve_u(config.measure, fitted, config.levels)
        cond = _condition_mask(config.measure, sample, config.levels.alpha)
        count = int(cond.sum())
        if count == 0:
            skipped += 1
            continue
        rates.append(float(np.mean(sample[cond, 0] <= u_root)))
    if skipped > 0.1 * config.reps:
        raise FitError(
            f"{skipped} of {config.reps} replications failed; the study is unreliable"
        )
    return float(np.mean(rates))
