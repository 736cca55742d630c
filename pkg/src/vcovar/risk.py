"""Conditional risk measures solved on the copula scale.

Each measure reduces to one monotone scalar equation in the copula argument u
of the target coordinate.  The equation is solved once for a static copula or
per date for a time-varying one, and the target's conditional quantile maps u
into a return value.  Working in u first keeps the solve dimensionless; the
marginal model enters exactly once at the end.

Coordinate convention: index 0 is the target, indexes 1..p the conditioning
assets.

Solving routes:

* closed generator shift for the frailty-built families (and the nested
  copula, whose top-level generator plays the same role);
* bracketed root on [1e-12, 1 - 1e-12] otherwise, which always straddles the
  root since any copula CDF runs from below alpha*beta to alpha along the
  bracket.

Both routes stay available independently so they can cross-check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .copulas.families import (
    ClaytonCopula,
    ComonotoneCopula,
    Copula,
    GaussianCopula,
    GumbelCopula,
    IndependenceCopula,
    StudentTCopula,
)
from .copulas.hac import HacCopula
from .copulas.mvcdf import bvn_cdf, bvt_cdf
from .distributions import normal_quantile, pit, skew_t_quantile, student_t_quantile
from .errors import DataError, SolverError
from .marginal import (
    SYSTEM_SERIES_SPEC,
    FittedMarginal,
    fit,
    select_model,
    var_parametric,
    var_path,
)

__all__ = [
    "MEASURES",
    "ProbLevels",
    "RiskSeries",
    "covar",
    "covar_u",
    "covar_u_path",
    "limit_u",
    "limit_values",
    "mcovar",
    "mcovar_u",
    "risk_series",
    "scovar",
    "solve_u",
    "vcovar",
    "vcovar_u",
]

MEASURES = ("VaR", "CoVaR", "SCoVaR", "MCoVaR", "VCoVaR")

# root bracket in u; the endpoints bound every copula's root strictly
_U_LO = 1e-12
_U_HI = 1.0 - 1e-12
_XTOL = 1e-12


@dataclass(frozen=True)
class ProbLevels:
    """Pair of tail probabilities: alpha for the conditioning events, beta for
    the conditional quantile of the target."""

    alpha: float = 0.05
    beta: float = 0.05

    def __post_init__(self):
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not (isinstance(value, (int, float)) and 0.0 < value < 1.0):
                raise DataError(f"{name} must lie strictly inside (0, 1), got {value}")


# ---------------------------------------------------------------------------
# closed generator shifts
# ---------------------------------------------------------------------------


def _clayton_shift(theta: float, log_q: float, log_beta: float) -> float:
    # u = psi(phi(q*beta) - phi(q)); all powers kept as exponents of -theta*log
    a_big = -theta * (log_q + log_beta)
    a_small = -theta * log_q
    log_u = -(a_big + math.log1p(-math.exp(a_small - a_big) + math.exp(-a_big))) / theta
    return math.exp(log_u)


def _gumbel_shift(theta: float, log_q: float, log_beta: float) -> float:
    x_big = -(log_q + log_beta)
    x_small = -log_q
    if x_small == 0.0:
        return math.exp(-x_big)
    log_s = theta * math.log(x_big) + math.log1p(-math.exp(theta * (math.log(x_small) - math.log(x_big))))
    return math.exp(-math.exp(log_s / theta))


def _generator_shift(family: str, theta: float, log_q: float, log_beta: float) -> float:
    if family == "clayton":
        return _clayton_shift(theta, log_q, log_beta)
    return _gumbel_shift(theta, log_q, log_beta)


def _log_conditioning_prob(copula: Copula, alpha: float) -> float:
    """log C_p(alpha, ..., alpha) over the conditioning coordinates."""
    p = copula.dim - 1
    if p == 1:
        return math.log(alpha)
    block = copula.margin(list(range(1, copula.dim)))
    c = float(block.cdf(np.full(p, alpha)))
    if not c > 0.0:
        raise SolverError("conditioning event has zero probability under the fitted copula")
    return math.log(c)


def _closed_u(copula: Copula, levels: ProbLevels) -> float | None:
    """Closed-form u where one exists, else None."""
    a, b = levels.alpha, levels.beta
    if isinstance(copula, IndependenceCopula):
        return b
    if isinstance(copula, ComonotoneCopula):
        return a * b
    if isinstance(copula, (ClaytonCopula, GumbelCopula)):
        family = "clayton" if isinstance(copula, ClaytonCopula) else "gumbel"
        log_q = _log_conditioning_prob(copula, a)
        return _generator_shift(family, copula.theta, log_q, math.log(b))
    if isinstance(copula, HacCopula):
        # the target couples through the top-level generator, so the shift
        # applies with the nested block's CDF as the conditioning probability
        log_q = _log_conditioning_prob(copula, a)
        return _generator_shift(copula.outer_family, copula.theta_outer, log_q, math.log(b))
    return None


def _bracketed_root(objective, xtol: float = _XTOL) -> float:
    f_lo = objective(_U_LO)
    f_hi = objective(_U_HI)
    if f_lo == 0.0:
        return _U_LO
    if f_hi == 0.0:
        return _U_HI
    if f_lo * f_hi > 0.0:
        raise SolverError(
            f"no sign change on the u bracket (f({_U_LO})={f_lo:.3e}, f(1-{1 - _U_HI:.0e})={f_hi:.3e})"
        )
    return float(brentq(objective, _U_LO, _U_HI, xtol=xtol))


def _require_method(method: str):
    if method not in ("auto", "closed", "numeric"):
        raise DataError(f"method must be auto, closed, or numeric, got {method!r}")


# ---------------------------------------------------------------------------
# u-scale solvers
# ---------------------------------------------------------------------------


def covar_u(copula: Copula, levels: ProbLevels, method: str = "auto") -> float:
    """Solve C(u, alpha) = alpha * beta for the bivariate copula of
    (target, conditioning asset)."""
    _require_method(method)
    if copula.dim != 2:
        raise DataError(f"pairwise measure needs a bivariate copula, got dim {copula.dim}")
    if method != "numeric":
        u = _closed_u(copula, levels)
        if u is not None:
            return u
        if method == "closed":
            raise SolverError(f"no closed form for {type(copula).__name__}")
    a, b = levels.alpha, levels.beta
    target = a * b

    def objective(u: float) -> float:
        return float(copula.cdf(np.array([u, a]))) - target

    return _bracketed_root(objective)


def mcovar_u(copula: Copula, levels: ProbLevels, method: str = "auto") -> float:
    """Solve C_{p+1}(u, alpha, ..., alpha) = beta * C_p(alpha, ..., alpha)."""
    _require_method(method)
    if copula.dim < 2:
        raise DataError(f"joint measure needs dim >= 2, got {copula.dim}")
    if method != "numeric":
        u = _closed_u(copula, levels)
        if u is not None:
            return u
        if method == "closed":
            raise SolverError(f"no closed form for {type(copula).__name__}")
    a, b = levels.alpha, levels.beta
    p = copula.dim - 1
    target = b * math.exp(_log_conditioning_prob(copula, a))
    tail = np.full(p, a)

    def objective(u: float) -> float:
        return float(copula.cdf(np.concatenate(([u], tail)))) - target

    return _bracketed_root(objective, xtol=_solver_xtol(copula))


def vcovar_u(copula: Copula, levels: ProbLevels) -> float:
    """Solve the union-event equation

        [u - S_p + S_{p+1}(u)] / (1 - S_p) = beta

    where S_p is the probability that every conditioning variable survives its
    alpha level, and S_{p+1}(u) additionally requires the target to survive u.
    The left side is a nondecreasing CDF-like function of u running 0 to 1.
    """
    a, b = levels.alpha, levels.beta
    if copula.dim < 2:
        raise DataError(f"union measure needs dim >= 2, got {copula.dim}")
    p = copula.dim - 1
    if isinstance(copula, ComonotoneCopula):
        return a * b
    if p == 1:
        return covar_u(copula, levels)
    block = copula.margin(list(range(1, copula.dim)))
    surv_p = float(block.survival_cdf(np.full(p, 1.0 - a)))
    denom = 1.0 - surv_p
    if not denom > 0.0:
        raise SolverError("union conditioning event has zero probability")
    tail = np.full(p, 1.0 - a)

    def objective(u: float) -> float:
        surv_full = float(copula.survival_cdf(np.concatenate(([1.0 - u], tail))))
        return (u - surv_p + surv_full) / denom - b

    return _bracketed_root(objective, xtol=_solver_xtol(copula))


def _solver_xtol(copula: Copula) -> float:
    # randomized-QMC rectangle probabilities carry ~1e-6 noise in dim >= 3
    if isinstance(copula, (GaussianCopula, StudentTCopula)) and copula.dim >= 3:
        return 1e-6
    return _XTOL


def limit_u(levels: ProbLevels, regime: str) -> float:
    """u under the two boundary dependence regimes."""
    if regime == "independence":
        return levels.beta
    if regime == "comonotone":
        return levels.alpha * levels.beta
    raise DataError(f"regime must be independence or comonotone, got {regime!r}")


def solve_u(measure: str, copula: Copula | None, levels: ProbLevels, method: str = "auto") -> float:
    """Dispatch on the measure name; VaR ignores the copula."""
    if measure == "VaR":
        return levels.beta
    if measure in ("CoVaR", "SCoVaR"):
        return covar_u(copula, levels, method)
    if measure == "MCoVaR":
        return mcovar_u(copula, levels, method)
    if measure == "VCoVaR":
        return vcovar_u(copula, levels)
    raise DataError(f"measure must be one of {MEASURES}, got {measure!r}")


# ---------------------------------------------------------------------------
# per-date values on the return scale
# ---------------------------------------------------------------------------


def covar(copula: Copula, marginal: FittedMarginal, levels: ProbLevels, t: int, method: str = "auto") -> float:
    return var_parametric(marginal, covar_u(copula, levels, method), t)


def mcovar(copula: Copula, marginal: FittedMarginal, levels: ProbLevels, t: int, method: str = "auto") -> float:
    return var_parametric(marginal, mcovar_u(copula, levels, method), t)


def vcovar(copula: Copula, marginal: FittedMarginal, levels: ProbLevels, t: int) -> float:
    return var_parametric(marginal, vcovar_u(copula, levels), t)


def limit_values(marginal: FittedMarginal, levels: ProbLevels, regime: str, t: int) -> float:
    return var_parametric(marginal, limit_u(levels, regime), t)


# ---------------------------------------------------------------------------
# dated series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskSeries:
    """Dated values of one measure for one target/conditioning choice."""

    measure: str
    target: str
    conditioning: tuple[str, ...]
    levels: ProbLevels
    values: np.ndarray
    dates: np.ndarray | None = None

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise DataError(f"measure must be one of {MEASURES}, got {self.measure!r}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        if self.dates is not None:
            dates = np.asarray(self.dates)
            if dates.shape[0] != self.values.shape[0]:
                raise DataError("dates and values must have equal length")
            object.__setattr__(self, "dates", dates)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    def to_frame(self):
        """Long-format table: date, measure, target, conditioning, alpha, beta, value."""
        import pandas as pd

        dates = self.dates if self.dates is not None else np.arange(self.n_obs)
        return pd.DataFrame(
            {
                "date": dates,
                "measure": self.measure,
                "target": self.target,
                "conditioning": "|".join(self.conditioning),
                "alpha": self.levels.alpha,
                "beta": self.levels.beta,
                "value": self.values,
            }
        )


def _quantile_path(marginal: FittedMarginal, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return marginal.mean_path + marginal.sigma_path * np.asarray(skew_t_quantile(u, marginal.innovation))


def _elliptical_path_params(copulas) -> tuple[np.ndarray, float | None] | None:
    """Extract (rho path, shape) when every per-date copula is the same
    bivariate elliptical family; None disables the fast path."""
    first = copulas[0]
    if isinstance(first, GaussianCopula):
        if all(type(c) is GaussianCopula and c.dim == 2 for c in copulas):
            return np.array([float(c.corr[0, 1]) for c in copulas]), None
        return None
    if isinstance(first, StudentTCopula):
        shape = first.shape
        if all(type(c) is StudentTCopula and c.dim == 2 and c.shape == shape for c in copulas):
            return np.array([float(c.corr[0, 1]) for c in copulas]), shape
        return None
    return None


def covar_u_path(rho_path, levels: ProbLevels, shape: float | None = None, iterations: int = 60) -> np.ndarray:
    """Vectorized pairwise solve across a path of elliptical correlations.

    shape None means Gaussian; otherwise Student-t with that many dof.
    Bisection halves a bracket per step, so 60 steps reach ~1e-18 width.
    """
    rho = np.asarray(rho_path, dtype=float)
    if np.any(np.abs(rho) > 1.0):
        raise DataError("correlation path must lie in [-1, 1]")
    a, b = levels.alpha, levels.beta
    if shape is None:
        q = normal_quantile
        joint = lambda x, y, r: bvn_cdf(x, y, r)
    else:
        q = lambda p: student_t_quantile(p, shape)
        joint = lambda x, y, r: bvt_cdf(x, y, r, shape)
    y_alpha = float(q(a))
    target = a * b
    lo = np.full(rho.shape, _U_LO)
    hi = np.full(rho.shape, _U_HI)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        f_mid = joint(q(mid), y_alpha, rho) - target
        below = f_mid < 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def risk_series(
    measure: str,
    copula,
    marginal: FittedMarginal,
    levels: ProbLevels,
    *,
    target: str = "target",
    conditioning: tuple[str, ...] = (),
    dates=None,
    method: str = "auto",
) -> RiskSeries:
    """Build the dated series of one measure.

    copula is a single fitted copula (solved once, value varies through the
    conditional mean and volatility paths) or a per-date sequence of copulas
    (re-solved per date).  For VaR pass copula=None.
    """
    if measure == "VaR" or isinstance(copula, Copula) or copula is None:
        u = solve_u(measure, copula, levels, method)
        values = var_path(marginal, u)
        return RiskSeries(measure, target, conditioning, levels, values, dates)

    copulas = list(copula)
    if len(copulas) != marginal.n_obs:
        raise DataError(
            f"per-date copula path length {len(copulas)} does not match {marginal.n_obs} observations"
        )
    fast = _elliptical_path_params(copulas) if measure in ("CoVaR", "SCoVaR") else None
    if fast is not None:
        rho, shape = fast
        u_path = covar_u_path(rho, levels, shape)
    else:
        u_path = np.array([solve_u(measure, c, levels, method) for c in copulas])
    values = _quantile_path(marginal, u_path)
    return RiskSeries(measure, target, conditioning, levels, values, dates)


def scovar(
    target_series,
    conditioning_series,
    levels: ProbLevels,
    *,
    family: str = "student_t",
    target_spec=None,
    target_name: str = "target",
    conditioning_names: tuple[str, ...] | None = None,
    dates=None,
    method: str = "auto",
) -> RiskSeries:
    """Pairwise measure against the aggregated conditioning block.

    Sums the conditioning returns into one system series, fits that sum's
    dedicated volatility model, fits the requested bivariate copula between
    target and sum pseudo-observations, and solves once.
    """
    from .copulas.fitting import fit_ml

    cond = np.column_stack([np.asarray(c, dtype=float) for c in _as_columns(conditioning_series)])
    target_arr = np.asarray(target_series, dtype=float).ravel()
    if cond.shape[0] != target_arr.shape[0]:
        raise DataError("target and conditioning series must have equal length")
    if conditioning_names is None:
        conditioning_names = tuple(f"asset{i + 1}" for i in range(cond.shape[1]))
    system = cond.sum(axis=1)

    target_fit = fit(target_arr, target_spec) if target_spec is not None else select_model(target_arr)
    system_fit = fit(system, SYSTEM_SERIES_SPEC)
    pseudo = np.column_stack(
        [pit(target_fit.z, target_fit.innovation), pit(system_fit.z, system_fit.innovation)]
    )
    copula = fit_ml(pseudo, family).copula
    u = covar_u(copula, levels, method)
    return RiskSeries(
        "SCoVaR", target_name, conditioning_names, levels, var_path(target_fit, u), dates
    )


def _as_columns(series):
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        return [arr]
    if arr.ndim == 2:
        return [arr[:, j] for j in range(arr.shape[1])]
    raise DataError("conditioning series must be 1- or 2-dimensional")
