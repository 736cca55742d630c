"""Maximum-likelihood fitting of the static families on pseudo-observations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from ..errors import FitError
from .families import (
    STUDENT_T_SHAPE_CAP,
    ClaytonCopula,
    Copula,
    GaussianCopula,
    GumbelCopula,
    IndependenceCopula,
    StudentTCopula,
)

__all__ = ["FitResult", "fit_ml", "kendall_tau_matrix", "nearest_corr"]

_FITTABLE = ("independence", "gaussian", "student_t", "clayton", "gumbel")


@dataclass(frozen=True)
class FitResult:
    copula: Copula
    loglik: float
    aic: float
    n_obs: int
    n_params: int
    converged: bool = True
    message: str = ""

    def to_record(self) -> dict:
        return {
            "copula": self.copula.to_record(),
            "loglik": self.loglik,
            "aic": self.aic,
            "n_obs": self.n_obs,
            "n_params": self.n_params,
            "converged": self.converged,
        }


def _check_pseudo_obs(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] < 10 or u.shape[1] < 2:
        raise ValueError(f"pseudo-observations must be (n >= 10, d >= 2), got {u.shape}")
    if not np.all((u > 0.0) & (u < 1.0)):
        raise ValueError("pseudo-observations must lie strictly inside (0, 1)")
    return u


def kendall_tau_matrix(x: np.ndarray) -> np.ndarray:
    """Pairwise tie-adjusted (tau-b) Kendall correlation matrix."""
    x = np.asarray(x, dtype=float)
    d = x.shape[1]
    out = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            out[i, j] = out[j, i] = stats.kendalltau(x[:, i], x[:, j]).statistic
    return out


def nearest_corr(mat: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Eigenvalue-clipped projection to a positive-definite correlation matrix."""
    mat = 0.5 * (mat + mat.T)
    w, v = np.linalg.eigh(mat)
    if w.min() > floor:
        return mat
    w = np.clip(w, floor, None)
    fixed = (v * w) @ v.T
    s = np.sqrt(np.diag(fixed))
    return fixed / np.outer(s, s)


def _sum_logpdf(copula: Copula, u: np.ndarray) -> float:
    vals = np.asarray(copula.logpdf(u))
    total = vals.sum()
    return float(total) if np.isfinite(total) else -np.inf


def _fit_archimedean(u: np.ndarray, family: str) -> FitResult:
    cls = ClaytonCopula if family == "clayton" else GumbelCopula
    lo, hi = (1e-4, 200.0) if family == "clayton" else (1.0 + 1e-8, 200.0)
    d = u.shape[1]

    def nll(log_theta: float) -> float:
        ll = _sum_logpdf(cls(math.exp(log_theta), d), u)
        return -ll if np.isfinite(ll) else 1e12

    res = optimize.minimize_scalar(
        nll, bounds=(math.log(lo), math.log(hi)), method="bounded",
        options={"xatol": 1e-10},
    )
    theta = math.exp(res.x)
    copula = cls(theta, d)
    ll = -float(res.fun)
    k = 1
    return FitResult(copula, ll, 2.0 * k - 2.0 * ll, u.shape[0], k, bool(res.success))


def _normal_scores_corr(u: np.ndarray) -> np.ndarray:
    z = stats.norm.ppf(u)
    c = z.T @ z / u.shape[0]
    s = np.sqrt(np.diag(c))
    return nearest_corr(c / np.outer(s, s))


def _fit_gaussian(u: np.ndarray) -> FitResult:
    n, d = u.shape
    k = d * (d - 1) // 2
    if d == 2:
        z = stats.norm.ppf(u)

        def nll(arc: float) -> float:
            rho = math.tanh(arc)
            cop = GaussianCopula(rho, 2)
            ll = _sum_logpdf(cop, u)
            return -ll if np.isfinite(ll) else 1e12

        res = optimize.minimize_scalar(nll, bounds=(-7.0, 7.0), method="bounded", options={"xatol": 1e-12})
        rho = math.tanh(res.x)
        cop = GaussianCopula(rho, 2)
        ll = -float(res.fun)
        return FitResult(cop, ll, 2.0 * k - 2.0 * ll, n, k, bool(res.success))
    corr = _normal_scores_corr(u)
    cop = GaussianCopula(corr, d)
    ll = _sum_logpdf(cop, u)
    return FitResult(cop, ll, 2.0 * k - 2.0 * ll, n, k)


def _fit_student_t(u: np.ndarray) -> FitResult:
    n, d = u.shape
    k = d * (d - 1) // 2 + 1
    nu_lo, nu_hi = 0.5, STUDENT_T_SHAPE_CAP
    if d == 2:
        # profile likelihood: for each shape, transform once and maximize over
        # the correlation; then a 1-d bounded search over the shape
        from .dynamic import _bivariate_t_loglik

        def profile(log_nu: float, want_rho: bool = False):
            nu = math.exp(log_nu)
            q = stats.t.ppf(u, df=nu)

            def nll_rho(arc: float) -> float:
                ll = _bivariate_t_loglik(q, math.tanh(arc), nu).sum()
                return -ll if np.isfinite(ll) else 1e12

            inner = optimize.minimize_scalar(
                nll_rho, bounds=(-7.0, 7.0), method="bounded", options={"xatol": 1e-10}
            )
            return (inner.fun, math.tanh(inner.x)) if want_rho else inner.fun

        res = optimize.minimize_scalar(
            profile, bounds=(math.log(nu_lo), math.log(nu_hi)), method="bounded",
            options={"xatol": 1e-8},
        )
        fun, rho = profile(res.x, want_rho=True)
        nu = math.exp(res.x)
        cop = StudentTCopula(rho, nu, 2)
        ll = -float(fun)
        return FitResult(cop, ll, 2.0 * k - 2.0 * ll, n, k, bool(res.success))
    # d >= 3: correlation from pairwise tau inversion, shape by profile ML
    tau_mat = kendall_tau_matrix(u)
    corr = nearest_corr(np.sin(0.5 * np.pi * tau_mat))

    def nll_nu(log_nu: float) -> float:
        nu = math.exp(log_nu)
        ll = _sum_logpdf(StudentTCopula(corr, nu, d), u)
        return -ll if np.isfinite(ll) else 1e12

    res = optimize.minimize_scalar(
        nll_nu, bounds=(math.log(nu_lo), math.log(nu_hi)), method="bounded",
        options={"xatol": 1e-10},
    )
    nu = math.exp(res.x)
    cop = StudentTCopula(corr, nu, d)
    ll = -float(res.fun)
    return FitResult(cop, ll, 2.0 * k - 2.0 * ll, n, k, bool(res.success))


def fit_ml(u: np.ndarray, family: str) -> FitResult:
    """Fit one family by ML on pseudo-observations in (0, 1)^d.

    Supported families: independence (no parameters), gaussian, student_t,
    clayton, gumbel.  AIC = 2k - 2 loglik.
    """
    try:
        u = _check_pseudo_obs(u)
    except ValueError as exc:
        raise FitError(str(exc)) from exc
    family = family.lower()
    if family not in _FITTABLE:
        raise FitError(f"family must be one of {_FITTABLE}, got {family!r}")
    try:
        if family == "independence":
            return FitResult(IndependenceCopula(u.shape[1]), 0.0, 0.0, u.shape[0], 0)
        if family == "clayton" or family == "gumbel":
            return _fit_archimedean(u, family)
        if family == "gaussian":
            return _fit_gaussian(u)
        return _fit_student_t(u)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FitError(f"{family} copula fit failed: {exc}") from exc
