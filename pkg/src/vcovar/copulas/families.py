"""Static copula families: Independence, Comonotone, Clayton, Gumbel, Gaussian,
Student-t, plus the 180-degree survival rotation.

Every family exposes the same duck-typed surface:

* ``cdf(u)`` / ``survival_cdf(u)`` — vectorized over rows of u;
* ``margin(keep)`` — the copula of a coordinate subset (dropped args set to 1);
* ``sample(n, rng)`` — inverse/frailty construction, reproducible under a seed;
* ``kendall_tau()`` / ``from_tau(tau, ...)`` — parameter <-> tau conversions;
* ``logpdf(u)`` — density for likelihood work (families that have one);
* ``rotate180()`` — the survival copula as a first-class object;
* ``to_record()`` — plain-dict serialization.

Archimedean generator arithmetic runs in log space: strong dependence sends
u**(-theta) far past the float range otherwise.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .mvcdf import bvn_cdf, bvt_cdf, mvn_cdf, mvt_cdf

__all__ = [
    "Copula",
    "IndependenceCopula",
    "ComonotoneCopula",
    "ClaytonCopula",
    "GumbelCopula",
    "GaussianCopula",
    "StudentTCopula",
    "SurvivalCopula",
    "copula_from_record",
    "sample_positive_stable",
    "clayton_log_cdf",
    "gumbel_log_cdf",
    "STUDENT_T_SHAPE_CAP",
]

# profile-likelihood cap on the t-copula dof
STUDENT_T_SHAPE_CAP = 500.0


def _rows(u, dim: int) -> np.ndarray:
    """Coerce input to an (n, dim) float array.

    For dim == 1, scalars and 1-d arrays are read as single coordinates."""
    arr = np.asarray(u, dtype=float)
    if dim == 1:
        return arr.reshape(-1, 1)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def _maybe_scalar(values: np.ndarray, u) -> np.ndarray | float:
    arr = np.asarray(u)
    collapse = arr.ndim == 1 or arr.ndim == 0
    return float(values[0]) if collapse and values.size == 1 else values


class Copula:
    """Shared plumbing: inclusion-exclusion survival CDF and rotation."""

    dim: int

    def cdf(self, u):  # pragma: no cover - abstract
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def margin(self, keep: Sequence[int]) -> "Copula":  # pragma: no cover
        raise NotImplementedError

    def logpdf(self, u):
        raise NotImplementedError(f"{type(self).__name__} has no usable density")

    def rotate180(self) -> "Copula":
        return SurvivalCopula(self)

    def survival_cdf(self, u):
        """CDF of the 180-degree rotated copula: P(all 1 - U_k <= u_k).

        Inclusion-exclusion over the base CDF; 2**dim terms, fine for dim <= 6.
        """
        pts = _rows(u, self.dim)
        n, d = pts.shape
        total = np.zeros(n)
        flipped = 1.0 - pts
        for mask in range(2**d):
            v = np.ones((n, d))
            size = 0
            for k in range(d):
                if mask >> k & 1:
                    v[:, k] = flipped[:, k]
                    size += 1
            total += (-1.0) ** size * np.asarray(self.cdf(v))
        return _maybe_scalar(np.clip(total, 0.0, 1.0), u)

    def _check_keep(self, keep: Sequence[int]) -> list[int]:
        keep = list(keep)
        if not keep or len(set(keep)) != len(keep) or any(k < 0 or k >= self.dim for k in keep):
            raise ValueError(f"keep must be distinct indices inside 0..{self.dim - 1}")
        return keep


class IndependenceCopula(Copula):
    def __init__(self, dim: int = 2):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def cdf(self, u):
        pts = _rows(u, self.dim)
        return _maybe_scalar(np.prod(pts, axis=1), u)

    def survival_cdf(self, u):
        return self.cdf(u)  # radially symmetric

    def rotate180(self):
        return self

    def logpdf(self, u):
        pts = _rows(u, self.dim)
        return _maybe_scalar(np.zeros(pts.shape[0]), u)

    def sample(self, n, rng):
        return rng.uniform(size=(n, self.dim))

    def margin(self, keep):
        return IndependenceCopula(len(self._check_keep(keep)))

    def kendall_tau(self) -> float:
        return 0.0

    def to_record(self) -> dict:
        return {"family": "independence", "dim": self.dim}

    @property
    def n_params(self) -> int:
        return 0


class ComonotoneCopula(Copula):
    def __init__(self, dim: int = 2):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def cdf(self, u):
        pts = _rows(u, self.dim)
        return _maybe_scalar(np.min(pts, axis=1), u)

    def survival_cdf(self, u):
        return self.cdf(u)  # rotation maps the upper Frechet bound to itself

    def rotate180(self):
        return self

    def sample(self, n, rng):
        w = rng.uniform(size=n)
        return np.tile(w[:, None], (1, self.dim))

    def margin(self, keep):
        return ComonotoneCopula(len(self._check_keep(keep)))

    def kendall_tau(self) -> float:
        return 1.0

    def to_record(self) -> dict:
        return {"family": "comonotone", "dim": self.dim}

    @property
    def n_params(self) -> int:
        return 0


# ---------------------------------------------------------------------------
# Archimedean families
# ---------------------------------------------------------------------------


def clayton_log_cdf(log_pts: np.ndarray, theta: float) -> np.ndarray:
    """log C(u) for Clayton from log(u) rows; stable for large theta."""
    d = log_pts.shape[1]
    a = -theta * log_pts  # in [0, inf]
    m = np.max(a, axis=1)
    zero = np.isinf(m)
    m_safe = np.where(zero, 0.0, m)
    t_sum = np.exp(a - m_safe[:, None]).sum(axis=1) - (d - 1) * np.exp(-m_safe)
    out = -(m_safe + np.log(t_sum)) / theta
    return np.where(zero, -np.inf, out)


def gumbel_log_cdf(log_pts: np.ndarray, theta: float) -> np.ndarray:
    """log C(u) for Gumbel from log(u) rows; stable for large theta."""
    with np.errstate(divide="ignore"):
        b = theta * np.log(-log_pts)  # -inf when u == 1
    b = np.where(np.isnan(b), -np.inf, b)
    return -np.exp(logsumexp(b, axis=1) / theta)


class ClaytonCopula(Copula):
    """Exchangeable Clayton, theta > 0 (lower tail dependent)."""

    def __init__(self, theta: float, dim: int = 2):
        if not (theta > 0.0 and math.isfinite(theta)):
            raise ValueError(f"Clayton theta must be finite and > 0, got {theta}")
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.theta = float(theta)
        self.dim = dim

    # generator phi(t) = (t**-theta - 1) / theta; log-space throughout
    def generator(self, t):
        t = np.asarray(t, dtype=float)
        return np.expm1(-self.theta * np.log(t)) / self.theta

    def generator_inv(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(-np.log1p(self.theta * s) / self.theta)

    def _log_cdf(self, pts: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            log_pts = np.log(pts)
        return clayton_log_cdf(log_pts, self.theta)

    def cdf(self, u):
        pts = _rows(u, self.dim)
        return _maybe_scalar(np.exp(self._log_cdf(pts)), u)

    def logpdf(self, u):
        pts = _rows(u, self.dim)
        d = pts.shape[1]
        theta = self.theta
        log_c = self._log_cdf(pts)  # = -(1/theta) * log(sum u^-theta - d + 1)
        k = np.arange(d)
        out = (
            np.sum(np.log1p(k * theta))
            + (1.0 + theta * d) * log_c
            - (theta + 1.0) * np.log(pts).sum(axis=1)
        )
        return _maybe_scalar(out, u)

    def sample(self, n, rng):
        shape = 1.0 / self.theta
        v = rng.gamma(shape, 1.0, size=n)
        e = rng.exponential(size=(n, self.dim))
        # psi(E/V) with unscaled generator: (1 + E/V) ** (-1/theta)
        return np.exp(-np.log1p(e / v[:, None]) / self.theta)

    def margin(self, keep):
        kept = self._check_keep(keep)
        if len(kept) == 1:
            return IndependenceCopula(1)
        return ClaytonCopula(self.theta, len(kept))

    def kendall_tau(self) -> float:
        return self.theta / (self.theta + 2.0)

    @classmethod
    def from_tau(cls, tau: float, dim: int = 2) -> "ClaytonCopula":
        if not 0.0 < tau < 1.0:
            raise ValueError(f"Clayton requires tau in (0, 1), got {tau}")
        return cls(2.0 * tau / (1.0 - tau), dim)

    def to_record(self) -> dict:
        return {"family": "clayton", "dim": self.dim, "theta": self.theta}

    @property
    def n_params(self) -> int:
        return 1


def sample_positive_stable(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Positive stable variates with Laplace transform exp(-t**alpha), 0 < alpha <= 1."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if alpha == 1.0:
        return np.ones(n)
    u = rng.uniform(size=n)
    e = rng.exponential(size=n)
    su = np.sin(np.pi * u)
    return (
        np.sin(alpha * np.pi * u)
        / su ** (1.0 / alpha)
        * (np.sin((1.0 - alpha) * np.pi * u) / e) ** ((1.0 - alpha) / alpha)
    )


class GumbelCopula(Copula):
    """Exchangeable Gumbel, theta >= 1 (upper tail dependent)."""

    def __init__(self, theta: float, dim: int = 2):
        if not (theta >= 1.0 and math.isfinite(theta)):
            raise ValueError(f"Gumbel theta must be finite and >= 1, got {theta}")
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.theta = float(theta)
        self.dim = dim

    def generator(self, t):
        t = np.asarray(t, dtype=float)
        return (-np.log(t)) ** self.theta

    def generator_inv(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(-(s ** (1.0 / self.theta)))

    def _log_cdf(self, pts: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            log_pts = np.log(pts)
        return gumbel_log_cdf(log_pts, self.theta)

    def cdf(self, u):
        pts = _rows(u, self.dim)
        return _maybe_scalar(np.exp(self._log_cdf(pts)), u)

    def _deriv_coeffs(self, d: int) -> np.ndarray:
        # psi(t) = exp(-t**alpha); psi^(d)(t) = psi(t) * sum_k c[d,k] t^(k*alpha - d)
        # recurrence: c[d+1,k] = (k*alpha - d) c[d,k] - alpha c[d,k-1]
        alpha = 1.0 / self.theta
        c = np.zeros(d + 1)
        c[1] = -alpha
        for m in range(1, d):
            new = np.zeros(d + 1)
            for k in range(1, m + 2):
                new[k] = (k * alpha - m) * c[k] - (alpha * c[k - 1] if k >= 1 else 0.0)
            c = new
        return c[1:]  # coefficients for k = 1..d, all of sign (-1)^d

    def logpdf(self, u):
        pts = _rows(u, self.dim)
        d = pts.shape[1]
        theta = self.theta
        coeffs = self._deriv_coeffs(d)
        x = -np.log(pts)
        log_x = np.log(x)
        log_s = logsumexp(theta * log_x, axis=1)  # log sum x_k**theta
        alpha = 1.0 / theta
        k = np.arange(1, d + 1)
        # |psi^(d)(S)| = psi(S) * sum_k |c_k| S^(k*alpha - d), S = sum x**theta
        terms = np.log(np.abs(coeffs))[None, :] + (k[None, :] * alpha - d) * log_s[:, None]
        log_psi_d = -np.exp(alpha * log_s) + logsumexp(terms, axis=1)
        # |phi'(u)| = theta * (-log u)**(theta-1) / u
        log_phi_prime = math.log(theta) + (theta - 1.0) * log_x - np.log(pts)
        out = log_psi_d + log_phi_prime.sum(axis=1)
        return _maybe_scalar(out, u)

    def sample(self, n, rng):
        v = sample_positive_stable(1.0 / self.theta, n, rng)
        e = rng.exponential(size=(n, self.dim))
        return np.exp(-((e / v[:, None]) ** (1.0 / self.theta)))

    def margin(self, keep):
        kept = self._check_keep(keep)
        if len(kept) == 1:
            return IndependenceCopula(1)
        return GumbelCopula(self.theta, len(kept))

    def kendall_tau(self) -> float:
        return 1.0 - 1.0 / self.theta

    @classmethod
    def from_tau(cls, tau: float, dim: int = 2) -> "GumbelCopula":
        if not 0.0 <= tau < 1.0:
            raise ValueError(f"Gumbel requires tau in [0, 1), got {tau}")
        return cls(1.0 / (1.0 - tau), dim)

    def to_record(self) -> dict:
        return {"family": "gumbel", "dim": self.dim, "theta": self.theta}

    @property
    def n_params(self) -> int:
        return 1


# ---------------------------------------------------------------------------
# Elliptical families
# ---------------------------------------------------------------------------


def _check_corr(corr: np.ndarray, dim: int) -> np.ndarray:
    corr = np.atleast_2d(np.asarray(corr, dtype=float))
    if corr.shape != (dim, dim):
        raise ValueError(f"correlation must be {dim}x{dim}, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix needs a unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise ValueError("correlations must lie in [-1, 1]")
    return corr


def _corr_from_rho(rho: float | np.ndarray, dim: int) -> np.ndarray:
    if np.ndim(rho) == 0:
        corr = np.full((dim, dim), float(rho))
        np.fill_diagonal(corr, 1.0)
        return corr
    return _check_corr(np.asarray(rho, dtype=float), dim)


class _EllipticalCopula(Copula):
    corr: np.ndarray

    def survival_cdf(self, u):
        return self.cdf(u)  # elliptical copulas are radially symmetric

    def rotate180(self):
        return self

    def kendall_tau(self):
        if self.dim != 2:
            raise ValueError("scalar tau is defined for the bivariate case only")
        return 2.0 / np.pi * np.arcsin(self.corr[0, 1])

    @staticmethod
    def rho_from_tau(tau: float) -> float:
        if not -1.0 < tau < 1.0:
            raise ValueError(f"elliptical families require tau in (-1, 1), got {tau}")
        return math.sin(0.5 * np.pi * tau)

    def _chol(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.corr)
        except np.linalg.LinAlgError:
            w, v = np.linalg.eigh(self.corr)
            w = np.clip(w, 1e-12, None)
            fixed = (v * w) @ v.T
            s = np.sqrt(np.diag(fixed))
            return np.linalg.cholesky(fixed / np.outer(s, s))


class GaussianCopula(_EllipticalCopula):
    def __init__(self, corr: float | np.ndarray, dim: int = 2):
        self.dim = dim
        self.corr = _corr_from_rho(corr, dim)

    def cdf(self, u):
        pts = _rows(u, self.dim)
        z = stats.norm.ppf(pts)
        if self.dim == 2:
            return _maybe_scalar(np.asarray(bvn_cdf(z[:, 0], z[:, 1], self.corr[0, 1])), u)
        vals = np.array([mvn_cdf(row, self.corr) for row in z])
        return _maybe_scalar(vals, u)

    def logpdf(self, u):
        pts = _rows(u, self.dim)
        z = stats.norm.ppf(pts)
        sign, logdet = np.linalg.slogdet(self.corr)
        if sign <= 0:
            raise ValueError("correlation matrix must be positive definite")
        prec = np.linalg.inv(self.corr)
        quad = np.einsum("ij,jk,ik->i", z, prec - np.eye(self.dim), z)
        return _maybe_scalar(-0.5 * (logdet + quad), u)

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim)) @ self._chol().T
        return stats.norm.cdf(z)

    def margin(self, keep):
        keep = self._check_keep(keep)
        if len(keep) == 1:
            return IndependenceCopula(1)
        return GaussianCopula(self.corr[np.ix_(keep, keep)], len(keep))

    @classmethod
    def from_tau(cls, tau: float, dim: int = 2) -> "GaussianCopula":
        return cls(cls.rho_from_tau(tau), dim)

    def to_record(self) -> dict:
        return {"family": "gaussian", "dim": self.dim, "corr": self.corr.tolist()}

    @property
    def n_params(self) -> int:
        return self.dim * (self.dim - 1) // 2


class StudentTCopula(_EllipticalCopula):
    def __init__(self, corr: float | np.ndarray, shape: float, dim: int = 2):
        if not (0.0 < shape <= STUDENT_T_SHAPE_CAP):
            raise ValueError(f"shape must be in (0, {STUDENT_T_SHAPE_CAP}], got {shape}")
        self.dim = dim
        self.corr = _corr_from_rho(corr, dim)
        self.shape = float(shape)

    def cdf(self, u):
        pts = _rows(u, self.dim)
        q = stats.t.ppf(pts, df=self.shape)
        if self.dim == 2:
            return _maybe_scalar(np.asarray(bvt_cdf(q[:, 0], q[:, 1], self.corr[0, 1], self.shape)), u)
        vals = np.array([mvt_cdf(row, self.corr, self.shape) for row in q])
        return _maybe_scalar(vals, u)

    def logpdf(self, u):
        pts = _rows(u, self.dim)
        nu, d = self.shape, self.dim
        q = stats.t.ppf(pts, df=nu)
        sign, logdet = np.linalg.slogdet(self.corr)
        if sign <= 0:
            raise ValueError("correlation matrix must be positive definite")
        prec = np.linalg.inv(self.corr)
        quad = np.einsum("ij,jk,ik->i", q, prec, q)
        const = (
            math.lgamma(0.5 * (nu + d))
            + (d - 1) * math.lgamma(0.5 * nu)
            - d * math.lgamma(0.5 * (nu + 1))
        )
        out = (
            const
            - 0.5 * logdet
            - 0.5 * (nu + d) * np.log1p(quad / nu)
            + 0.5 * (nu + 1.0) * np.log1p(q * q / nu).sum(axis=1)
        )
        return _maybe_scalar(out, u)

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim)) @ self._chol().T
        w = rng.chisquare(self.shape, size=n) / self.shape
        return stats.t.cdf(z / np.sqrt(w)[:, None], df=self.shape)

    def margin(self, keep):
        keep = self._check_keep(keep)
        if len(keep) == 1:
            return IndependenceCopula(1)
        return StudentTCopula(self.corr[np.ix_(keep, keep)], self.shape, len(keep))

    @classmethod
    def from_tau(cls, tau: float, shape: float, dim: int = 2) -> "StudentTCopula":
        return cls(cls.rho_from_tau(tau), shape, dim)

    def to_record(self) -> dict:
        return {
            "family": "student_t",
            "dim": self.dim,
            "corr": self.corr.tolist(),
            "shape": self.shape,
        }

    @property
    def n_params(self) -> int:
        return self.dim * (self.dim - 1) // 2 + 1


class SurvivalCopula(Copula):
    """180-degree rotation of a base copula (used for VCoVaR with Archimedeans)."""

    def __init__(self, base: Copula):
        self.base = base
        self.dim = base.dim

    def cdf(self, u):
        return self.base.survival_cdf(u)

    def survival_cdf(self, u):
        # the survival copula of the survival copula is the base again
        return self.base.cdf(u)

    def rotate180(self):
        return self.base

    def logpdf(self, u):
        return self.base.logpdf(1.0 - np.asarray(u, dtype=float))

    def sample(self, n, rng):
        return 1.0 - self.base.sample(n, rng)

    def margin(self, keep):
        return SurvivalCopula(self.base.margin(keep))

    def kendall_tau(self):
        return self.base.kendall_tau()  # tau is rotation-invariant

    def to_record(self) -> dict:
        return {"family": "survival", "base": self.base.to_record()}

    @property
    def n_params(self) -> int:
        return self.base.n_params


def copula_from_record(record: dict) -> Copula:
    """Rebuild a copula from its ``to_record`` dict."""
    family = record["family"]
    if family == "independence":
        return IndependenceCopula(record["dim"])
    if family == "comonotone":
        return ComonotoneCopula(record["dim"])
    if family == "clayton":
        return ClaytonCopula(record["theta"], record["dim"])
    if family == "gumbel":
        return GumbelCopula(record["theta"], record["dim"])
    if family == "gaussian":
        return GaussianCopula(np.asarray(record["corr"]), record["dim"])
    if family == "student_t":
        return StudentTCopula(np.asarray(record["corr"]), record["shape"], record["dim"])
    if family == "survival":
        return SurvivalCopula(copula_from_record(record["base"]))
    if family == "hac":
        from .hac import HacCopula

        return HacCopula.from_record(record)
    raise ValueError(f"unknown copula family {family!r}")
