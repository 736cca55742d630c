"""Standardized skewed Student-t innovation law and quantile helpers.

The skewed t here is the two-piece (inverse-scale-factor) construction applied
to the unit-variance Student-t, then shifted and scaled so the result has mean
zero and variance one for every admissible (skewness, shape) pair.  That is the
convention GARCH filtering assumes: standardized residuals are modeled by this
law and probability-integral transforms go through its CDF.

skewness > 0 tilts mass; skewness = 1 recovers the symmetric standardized t.
shape > 2 is required so the variance exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "SkewTParams",
    "skew_t_logpdf",
    "skew_t_cdf",
    "skew_t_quantile",
    "skew_t_sample",
    "normal_quantile",
    "student_t_quantile",
    "pit",
]

# PIT output is clipped into this open interval so downstream copula code never
# sees an exact 0 or 1.
_PIT_EPS = 1e-12


@dataclass(frozen=True)
class SkewTParams:
    """Skewness (> 0) and shape (> 2) of the standardized skewed t."""

    skewness: float
    shape: float

    def __post_init__(self) -> None:
        if not (self.skewness > 0.0 and math.isfinite(self.skewness)):
            raise ValueError(f"skewness must be finite and > 0, got {self.skewness}")
        if not (self.shape > 2.0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be finite and > 2, got {self.shape}")


def _moments(params: SkewTParams) -> tuple[float, float, float]:
    # Returns (scale s of the unit-variance t, mean mu_z and sd sigma_z of the
    # unstandardized skewed variable).  m1 is the absolute first moment of the
    # unit-variance t.
    zeta, nu = params.skewness, params.shape
    s = math.sqrt(nu / (nu - 2.0))
    m1 = (
        2.0
        * math.sqrt(nu - 2.0)
        / ((nu - 1.0) * math.exp(math.lgamma(0.5) + math.lgamma(0.5 * nu) - math.lgamma(0.5 * (nu + 1.0))))
    )
    mu_z = m1 * (zeta - 1.0 / zeta)
    var_z = (zeta * zeta + 1.0 / (zeta * zeta) - 1.0) - mu_z * mu_z
    return s, mu_z, math.sqrt(var_z)


def skew_t_logpdf(x: np.ndarray | float, params: SkewTParams) -> np.ndarray | float:
    """Log-density of the standardized skewed t, vectorized over x."""
    zeta, nu = params.skewness, params.shape
    s, mu_z, sd_z = _moments(params)
    x = np.asarray(x, dtype=float)
    z = sd_z * x + mu_z
    # two-piece argument: z/zeta on the right branch, z*zeta on the left
    arg = np.where(z >= 0.0, z / zeta, z * zeta)
    log_c = math.log(2.0) - math.log(zeta + 1.0 / zeta)
    out = (
        math.log(sd_z)
        + log_c
        + math.log(s)
        + stats.t.logpdf(s * arg, df=nu)
    )
    return out if out.ndim else float(out)


def skew_t_cdf(x: np.ndarray | float, params: SkewTParams) -> np.ndarray | float:
    """CDF of the standardized skewed t, vectorized over x."""
    zeta, nu = params.skewness, params.shape
    s, mu_z, sd_z = _moments(params)
    x = np.asarray(x, dtype=float)
    z = sd_z * x + mu_z
    z2 = zeta * zeta
    lower = (2.0 / (1.0 + z2)) * stats.t.cdf(s * z * zeta, df=nu)
    upper = 1.0 / (1.0 + z2) + (2.0 * z2 / (1.0 + z2)) * (stats.t.cdf(s * z / zeta, df=nu) - 0.5)
    out = np.where(z < 0.0, lower, upper)
    return out if out.ndim else float(out)


def skew_t_quantile(p: np.ndarray | float, params: SkewTParams) -> np.ndarray | float:
    """Quantile of the standardized skewed t, vectorized over p in (0, 1)."""
    zeta, nu = params.skewness, params.shape
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    s, mu_z, sd_z = _moments(params)
    z2 = zeta * zeta
    p0 = 1.0 / (1.0 + z2)  # mass left of the mode-side split point
    lower = stats.t.ppf(np.minimum(p_arr * (1.0 + z2) / 2.0, 1.0), df=nu) / (s * zeta)
    upper = zeta * stats.t.ppf((p_arr * (1.0 + z2) - 1.0) / (2.0 * z2) + 0.5, df=nu) / s
    z = np.where(p_arr < p0, lower, upper)
    out = (z - mu_z) / sd_z
    return out if out.ndim else float(out)


def skew_t_sample(n: int, params: SkewTParams, rng: np.random.Generator) -> np.ndarray:
    """Draw n variates by inverting uniforms (reproducible under a seeded rng)."""
    return np.asarray(skew_t_quantile(rng.uniform(size=n), params))


def normal_quantile(p: np.ndarray | float) -> np.ndarray | float:
    """Standard normal quantile."""
    out = stats.norm.ppf(p)
    return out if np.ndim(out) else float(out)


def student_t_quantile(p: np.ndarray | float, shape: float) -> np.ndarray | float:
    """Plain (non-standardized) Student-t quantile with `shape` dof."""
    if not shape > 0.0:
        raise ValueError(f"shape must be > 0, got {shape}")
    out = stats.t.ppf(p, df=shape)
    return out if np.ndim(out) else float(out)


def pit(z: np.ndarray, params: SkewTParams) -> np.ndarray:
    """Probability-integral transform of standardized residuals.

    Output is clipped into the open unit interval so exact 0/1 never reach the
    copula layer.
    """
    u = np.asarray(skew_t_cdf(z, params))
    return np.clip(u, _PIT_EPS, 1.0 - _PIT_EPS)
