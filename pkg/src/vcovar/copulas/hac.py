"""Hierarchical (nested) Archimedean copula with one nesting level.

Structure: coordinate 0 joins an exchangeable inner block through the outer
generator,

    C(u_0, u_1, ..., u_k) = psi_out( phi_out(u_0) + phi_out( C_in(u_1..u_k) ) ).

Generators come from {clayton, gumbel}.  Validity needs the inner block to be
at least as dependent as the outer link: tau_outer <= tau_inner is enforced at
construction (the sufficient nesting condition for same-family generators, and
the ordering the sweep grids use to mark invalid cells).

Sampling uses the outer-frailty / conditional-inner-frailty construction and is
implemented for same-family nesting (nested Gumbel: scaled positive stable;
nested Clayton: exponentially tilted stable via m-fold split rejection).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..errors import SolverError
from .families import (
    ClaytonCopula,
    Copula,
    GumbelCopula,
    IndependenceCopula,
    _maybe_scalar,
    _rows,
    clayton_log_cdf,
    gumbel_log_cdf,
    sample_positive_stable,
)

__all__ = ["HacCopula", "sample_tilted_stable"]

_FAMILIES = ("clayton", "gumbel")


def _tau_of(family: str, theta: float) -> float:
    return theta / (theta + 2.0) if family == "clayton" else 1.0 - 1.0 / theta


def _theta_of(family: str, tau: float) -> float:
    if family == "clayton":
        if not 0.0 < tau < 1.0:
            raise ValueError(f"clayton requires tau in (0, 1), got {tau}")
        return 2.0 * tau / (1.0 - tau)
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"gumbel requires tau in [0, 1), got {tau}")
    return 1.0 / (1.0 - tau)


def _ac_log_cdf(log_pts: np.ndarray, family: str, theta: float) -> np.ndarray:
    return clayton_log_cdf(log_pts, theta) if family == "clayton" else gumbel_log_cdf(log_pts, theta)


def _ac_copula(family: str, theta: float, dim: int) -> Copula:
    return ClaytonCopula(theta, dim) if family == "clayton" else GumbelCopula(theta, dim)


def sample_tilted_stable(alpha: float, tilt: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Variates with Laplace transform exp(-h * ((1 + t)**alpha - 1)) per tilt h.

    m-fold split rejection: each draw is a sum of m parts with tilt h/m, each
    accepted with probability exp(-s), so expected trials per part stay below e.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    tilt = np.asarray(tilt, dtype=float)
    if alpha == 1.0:
        return tilt.copy()  # LT degenerates to exp(-h t): point mass at h
    n = tilt.shape[0]
    parts = np.maximum(1, np.ceil(tilt).astype(np.int64))
    owner = np.repeat(np.arange(n), parts)
    lam = np.repeat(tilt / parts, parts)
    scale = lam ** (1.0 / alpha)
    vals = np.empty(owner.shape[0])
    pending = np.arange(owner.shape[0])
    for _ in range(10_000):
        if pending.size == 0:
            break
        s = scale[pending] * sample_positive_stable(alpha, pending.size, rng)
        accept = rng.uniform(size=pending.size) <= np.exp(-s)
        vals[pending[accept]] = s[accept]
        pending = pending[~accept]
    else:  # pragma: no cover - acceptance prob >= exp(-1) makes this unreachable
        raise SolverError("tilted-stable rejection sampler failed to terminate")
    return np.bincount(owner, weights=vals, minlength=n)


class HacCopula(Copula):
    def __init__(
        self,
        outer_family: str,
        theta_outer: float,
        inner_family: str,
        theta_inner: float,
        inner_dim: int = 2,
    ):
        if outer_family not in _FAMILIES or inner_family not in _FAMILIES:
            raise ValueError(f"generator families must be in {_FAMILIES}")
        if inner_dim < 2:
            raise ValueError("inner block needs at least 2 coordinates")
        # reuse the family constructors for the theta domain checks
        _ac_copula(outer_family, theta_outer, 2)
        _ac_copula(inner_family, theta_inner, 2)
        t_out = _tau_of(outer_family, theta_outer)
        t_in = _tau_of(inner_family, theta_inner)
        if t_out > t_in + 1e-12:
            raise ValueError(
                f"nesting condition violated: tau_outer={t_out:.4f} > tau_inner={t_in:.4f}"
            )
        self.outer_family = outer_family
        self.inner_family = inner_family
        self.theta_outer = float(theta_outer)
        self.theta_inner = float(theta_inner)
        self.inner_dim = inner_dim
        self.dim = 1 + inner_dim

    @classmethod
    def from_taus(
        cls,
        outer_family: str,
        tau_outer: float,
        inner_family: str,
        tau_inner: float,
        inner_dim: int = 2,
    ) -> "HacCopula":
        return cls(
            outer_family,
            _theta_of(outer_family, tau_outer),
            inner_family,
            _theta_of(inner_family, tau_inner),
            inner_dim,
        )

    @property
    def tau_outer(self) -> float:
        return _tau_of(self.outer_family, self.theta_outer)

    @property
    def tau_inner(self) -> float:
        return _tau_of(self.inner_family, self.theta_inner)

    def log_cdf(self, u) -> np.ndarray:
        pts = _rows(u, self.dim)
        with np.errstate(divide="ignore"):
            log_pts = np.log(pts)
        log_inner = _ac_log_cdf(log_pts[:, 1:], self.inner_family, self.theta_inner)
        outer_args = np.column_stack([log_pts[:, 0], log_inner])
        return _ac_log_cdf(outer_args, self.outer_family, self.theta_outer)

    def cdf(self, u):
        return _maybe_scalar(np.exp(self.log_cdf(u)), u)

    def sample(self, n, rng):
        if self.outer_family != self.inner_family:
            raise NotImplementedError("sampling implemented for same-family nesting only")
        e0 = rng.exponential(size=n)
        e_in = rng.exponential(size=(n, self.inner_dim))
        if self.outer_family == "gumbel":
            th1, th2 = self.theta_outer, self.theta_inner
            v0 = sample_positive_stable(1.0 / th1, n, rng)
            alpha = th1 / th2
            v01 = v0 ** (th2 / th1) * sample_positive_stable(alpha, n, rng)
            u0 = np.exp(-((e0 / v0) ** (1.0 / th1)))
            u_in = np.exp(-((e_in / v01[:, None]) ** (1.0 / th2)))
        else:
            th1, th2 = self.theta_outer, self.theta_inner
            v0 = rng.gamma(1.0 / th1, 1.0, size=n)
            v01 = sample_tilted_stable(th1 / th2, v0, rng)
            u0 = np.exp(-np.log1p(e0 / v0) / th1)
            u_in = np.exp(-np.log1p(e_in / v01[:, None]) / th2)
        return np.column_stack([u0, u_in])

    def margin(self, keep: Sequence[int]) -> Copula:
        keep = sorted(self._check_keep(keep))
        inner_kept = [k for k in keep if k >= 1]
        if 0 in keep:
            if not inner_kept:
                return IndependenceCopula(1)
            if len(inner_kept) == 1:
                return _ac_copula(self.outer_family, self.theta_outer, 2)
            return HacCopula(
                self.outer_family,
                self.theta_outer,
                self.inner_family,
                self.theta_inner,
                inner_dim=len(inner_kept),
            )
        if len(inner_kept) == 1:
            return IndependenceCopula(1)
        return _ac_copula(self.inner_family, self.theta_inner, len(inner_kept))

    def kendall_tau(self):
        raise ValueError("a nested copula has no single tau; use tau_outer/tau_inner")

    def to_record(self) -> dict:
        return {
            "family": "hac",
            "dim": self.dim,
            "outer_family": self.outer_family,
            "theta_outer": self.theta_outer,
            "inner_family": self.inner_family,
            "theta_inner": self.theta_inner,
        }

    @classmethod
    def from_record(cls, record: dict) -> "HacCopula":
        return cls(
            record["outer_family"],
            record["theta_outer"],
            record["inner_family"],
            record["theta_inner"],
            inner_dim=record["dim"] - 1,
        )

    @property
    def n_params(self) -> int:
        return 2
