"""Time-varying t copulas: a tanh-link scalar-correlation evolution for pairs,
and a correlation-targeting scalar-recursion model for d >= 2.

Both are estimated by maximum likelihood on pseudo-observations.  The scalar
evolution (pairs only) drives tomorrow's correlation with the trailing
10-day mean of quantile cross-products; the matrix recursion blends a long-run
second-moment target with the lagged outer product of standardized quantiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from ..errors import FitError

__all__ = [
    "PattonTSpec",
    "DccTSpec",
    "patton_theta_path",
    "dcc_r_path",
    "fit_patton_t",
    "fit_dcc_t",
]

_PATTON_LAGS = 10


@dataclass(frozen=True)
class PattonTSpec:
    """Scalar correlation evolution: theta_t = tanh((const + autoreg*theta_{t-1} + forcing*m_t)/2).

    m_t is the mean of the last 10 lagged products of t-quantile transforms.
    theta_start seeds the recursion and holds for the first 10 dates (burn-in).
    """

    const: float
    autoreg: float
    forcing: float
    shape: float
    theta_start: float

    def __post_init__(self) -> None:
        if not self.shape > 0.0:
            raise ValueError(f"shape must be > 0, got {self.shape}")
        if not -1.0 < self.theta_start < 1.0:
            raise ValueError(f"theta_start must be in (-1, 1), got {self.theta_start}")


@dataclass(frozen=True)
class DccTSpec:
    """Matrix recursion Q_t = (1-a-b) Qbar + a z_{t-1} z_{t-1}' + b Q_{t-1}."""

    shock: float
    persistence: float
    shape: float

    def __post_init__(self) -> None:
        if self.shock < 0.0 or self.persistence < 0.0:
            raise ValueError("shock and persistence must be >= 0")
        if self.shock + self.persistence >= 1.0:
            raise ValueError("shock + persistence must be < 1")
        if not self.shape > 2.0:
            raise ValueError(f"shape must be > 2 (standardized quantiles), got {self.shape}")


def _check_pseudo_obs(u: np.ndarray, dim: int | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise ValueError("pseudo-observations must form an (n, d) array")
    if dim is not None and u.shape[1] != dim:
        raise ValueError(f"expected {dim} columns, got {u.shape[1]}")
    if not np.all((u > 0.0) & (u < 1.0)):
        raise ValueError("pseudo-observations must lie strictly inside (0, 1)")
    return u


def _trailing_means(prod: np.ndarray) -> np.ndarray:
    # m[t] = mean(prod[t-10 : t]), defined for t >= 10
    c = np.concatenate([[0.0], np.cumsum(prod)])
    n = prod.shape[0]
    t = np.arange(_PATTON_LAGS, n)
    out = np.zeros(n)
    out[t] = (c[t] - c[t - _PATTON_LAGS]) / _PATTON_LAGS
    return out


def _theta_recursion(m: np.ndarray, const: float, autoreg: float, forcing: float, theta_start: float) -> np.ndarray:
    n = m.shape[0]
    theta = np.full(n, theta_start)
    th = theta_start
    tanh = math.tanh
    for t in range(_PATTON_LAGS, n):
        th = tanh(0.5 * (const + autoreg * th + forcing * m[t]))
        theta[t] = th
    return theta


def patton_theta_path(u: np.ndarray, spec: PattonTSpec) -> np.ndarray:
    """Per-date correlation path for a pair of pseudo-observation columns."""
    u = _check_pseudo_obs(u, dim=2)
    q = stats.t.ppf(u, df=spec.shape)
    m = _trailing_means(q[:, 0] * q[:, 1])
    return _theta_recursion(m, spec.const, spec.autoreg, spec.forcing, spec.theta_start)


def _bivariate_t_loglik(q: np.ndarray, rho: np.ndarray, nu: float) -> np.ndarray:
    # per-date log density of the bivariate t copula with correlation rho_t
    rho = np.clip(rho, -1.0 + 1e-10, 1.0 - 1e-10)
    const = math.lgamma(0.5 * (nu + 2.0)) + math.lgamma(0.5 * nu) - 2.0 * math.lgamma(0.5 * (nu + 1.0))
    q1, q2 = q[:, 0], q[:, 1]
    quad = (q1 * q1 - 2.0 * rho * q1 * q2 + q2 * q2) / (1.0 - rho * rho)
    return (
        const
        - 0.5 * np.log1p(-rho * rho)
        - 0.5 * (nu + 2.0) * np.log1p(quad / nu)
        + 0.5 * (nu + 1.0) * (np.log1p(q1 * q1 / nu) + np.log1p(q2 * q2 / nu))
    )


def fit_patton_t(
    u: np.ndarray,
    *,
    theta_start: float | None = None,
    shape_bounds: tuple[float, float] = (2.1, 100.0),
) -> tuple[PattonTSpec, float, float]:
    """ML fit of the scalar evolution; returns (spec, loglik, aic).

    theta_start defaults to the static t-copula correlation estimate (the
    recursion's initialization is left open by the sources; ledgered choice).
    """
    u = _check_pseudo_obs(u, dim=2)
    n = u.shape[0]
    if n < 3 * _PATTON_LAGS:
        raise FitError(f"need at least {3 * _PATTON_LAGS} rows, got {n}")
    if theta_start is None:
        from .fitting import fit_ml

        static = fit_ml(u, "student_t")
        theta_start = float(static.copula.corr[0, 1])
        nu0 = min(max(static.copula.shape, shape_bounds[0] + 0.1), 60.0)
    else:
        nu0 = 8.0
    theta_start = float(np.clip(theta_start, -0.99, 0.99))

    base = 2.0 * math.atanh(theta_start)

    # Profile likelihood over the shape: for a fixed shape the quantiles and
    # their trailing products are constant, so the inner search over the three
    # evolution coefficients is cheap.  Warm starts carry across shape trials.
    inner_cache: dict[str, object] = {"x": None, "fun": math.inf}

    def profile(log_nu: float) -> float:
        nu = math.exp(log_nu)
        q = stats.t.ppf(u, df=nu)
        m = _trailing_means(q[:, 0] * q[:, 1])

        def nll(params: np.ndarray) -> float:
            w, b_raw, c = params
            theta = _theta_recursion(m, w, math.tanh(b_raw), c, theta_start)
            ll = _bivariate_t_loglik(q, theta, nu).sum()
            return -ll if np.isfinite(ll) else 1e10

        starts = [np.array([base * 0.2, math.atanh(0.8), 0.0]), np.array([base, 0.0, 0.2])]
        if inner_cache["x"] is not None:
            starts.insert(0, inner_cache["x"])
        best = None
        for x0 in starts:
            res = optimize.minimize(nll, x0, method="Nelder-Mead", options={"maxiter": 600, "xatol": 1e-5, "fatol": 1e-7})
            if best is None or res.fun < best.fun:
                best = res
        if best.fun < inner_cache["fun"]:
            inner_cache["fun"] = best.fun
            inner_cache["best_nu"] = nu
            inner_cache["best_x"] = best.x
        inner_cache["x"] = best.x
        return best.fun

    optimize.minimize_scalar(
        profile,
        bounds=(math.log(shape_bounds[0]), math.log(shape_bounds[1])),
        method="bounded",
        options={"xatol": 1e-3},
    )
    if not np.isfinite(inner_cache["fun"]) or inner_cache["fun"] >= 1e10:
        raise FitError("scalar-evolution copula fit did not converge")

    # Joint polish over all four parameters from the profile solution.
    def nll_joint(params: np.ndarray) -> float:
        w, b_raw, c, log_nu = params
        nu = math.exp(log_nu)
        if not shape_bounds[0] <= nu <= shape_bounds[1]:
            return 1e10
        q = stats.t.ppf(u, df=nu)
        m = _trailing_means(q[:, 0] * q[:, 1])
        theta = _theta_recursion(m, w, math.tanh(b_raw), c, theta_start)
        ll = _bivariate_t_loglik(q, theta, nu).sum()
        return -ll if np.isfinite(ll) else 1e10

    x0 = np.append(inner_cache["best_x"], math.log(inner_cache["best_nu"]))
    res = optimize.minimize(
        nll_joint, x0, method="Nelder-Mead", options={"maxiter": 2000, "xatol": 1e-6, "fatol": 1e-8}
    )
    if res.fun <= inner_cache["fun"]:
        w, b_raw, c, log_nu = res.x
        nu_hat, fun = math.exp(log_nu), res.fun
    else:
        w, b_raw, c = inner_cache["best_x"]
        nu_hat, fun = inner_cache["best_nu"], inner_cache["fun"]
    spec = PattonTSpec(float(w), float(math.tanh(b_raw)), float(c), float(nu_hat), theta_start)
    ll = -float(fun)
    k = 4
    return spec, ll, 2.0 * k - 2.0 * ll


def _standardized_t_quantiles(u: np.ndarray, nu: float) -> np.ndarray:
    return stats.t.ppf(u, df=nu) * math.sqrt((nu - 2.0) / nu)


def dcc_r_path(u: np.ndarray, spec: DccTSpec) -> np.ndarray:
    """Per-date correlation matrices, shape (n, d, d).  Q_0 targets the
    second-moment matrix of the standardized quantiles; R_t normalizes Q_t."""
    u = _check_pseudo_obs(u)
    z = _standardized_t_quantiles(u, spec.shape)
    n, d = z.shape
    qbar = z.T @ z / n
    a, b = spec.shock, spec.persistence
    base = (1.0 - a - b) * qbar
    zz = np.einsum("ti,tj->tij", z, z)
    out = np.empty((n, d, d))
    out[0] = qbar
    for t in range(1, n):
        out[t] = base + a * zz[t - 1] + b * out[t - 1]
    diag = np.einsum("tii->ti", out)
    s = 1.0 / np.sqrt(diag)
    return out * s[:, :, None] * s[:, None, :]


def _dcc_loglik(u: np.ndarray, a: float, b: float, nu: float) -> float:
    q = stats.t.ppf(u, df=nu)
    n, d = u.shape
    r_path = dcc_r_path(u, DccTSpec(a, b, nu))
    try:
        chol = np.linalg.cholesky(r_path)
    except np.linalg.LinAlgError:
        return -np.inf
    logdet = 2.0 * np.log(np.einsum("tii->ti", chol)).sum(axis=1)
    sol = np.linalg.solve(chol, q[:, :, None])[:, :, 0]
    quad = (sol * sol).sum(axis=1)
    const = (
        math.lgamma(0.5 * (nu + d))
        + (d - 1) * math.lgamma(0.5 * nu)
        - d * math.lgamma(0.5 * (nu + 1))
    )
    ll = (
        n * const
        - 0.5 * logdet.sum()
        - 0.5 * (nu + d) * np.log1p(quad / nu).sum()
        + 0.5 * (nu + 1.0) * np.log1p(q * q / nu).sum()
    )
    return float(ll)


def fit_dcc_t(
    u: np.ndarray,
    *,
    shape_bounds: tuple[float, float] = (2.1, 100.0),
) -> tuple[DccTSpec, float, float]:
    """ML fit of (shock, persistence, shape); returns (spec, loglik, aic)."""
    u = _check_pseudo_obs(u)
    if u.shape[0] < 50:
        raise FitError(f"need at least 50 rows, got {u.shape[0]}")

    def unpack(x: np.ndarray) -> tuple[float, float, float]:
        total = 1.0 / (1.0 + math.exp(-x[0])) * 0.999  # a + b
        share = 1.0 / (1.0 + math.exp(-x[1]))
        nu = shape_bounds[0] + (shape_bounds[1] - shape_bounds[0]) / (1.0 + math.exp(-x[2]))
        return total * share, total * (1.0 - share), nu

    def nll(x: np.ndarray) -> float:
        a, b, nu = unpack(x)
        ll = _dcc_loglik(u, a, b, nu)
        return -ll if np.isfinite(ll) else 1e10

    x0 = np.array([math.log(0.95 / 0.05), math.log(0.05 / 0.95), 0.0])
    res = optimize.minimize(nll, x0, method="Nelder-Mead", options={"maxiter": 3000, "xatol": 1e-6, "fatol": 1e-8})
    if not np.isfinite(res.fun) or res.fun >= 1e10:
        raise FitError("correlation-recursion copula fit did not converge")
    a, b, nu = unpack(res.x)
    spec = DccTSpec(float(a), float(b), float(nu))
    ll = -float(res.fun)
    k = 3
    return spec, ll, 2.0 * k - 2.0 * ll
