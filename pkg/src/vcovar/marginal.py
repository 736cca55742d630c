"""Univariate return models.

ARMA conditional mean, GARCH or asymmetric (GJR) conditional variance, and
skewed heavy-tailed innovations, fitted by maximum likelihood.  The module
also houses the residual diagnostics (Ljung-Box, McLeod-Li, weighted Li-Mak,
sign-bias regression) and a staged model-selection routine that escalates
from a constant-variance ARMA model to GARCH and then to GJR-GARCH only when
the diagnostics demand it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, signal, stats

from .distributions import SkewTParams, skew_t_logpdf, skew_t_quantile
from .errors import DataError, FitError

__all__ = [
    "ArmaGarchSpec",
    "FittedMarginal",
    "SignBiasResult",
    "fit",
    "forecast_one_step",
    "refilter",
    "ljung_box",
    "mcleod_li",
    "weighted_li_mak",
    "sign_bias_tests",
    "select_model",
    "var_parametric",
    "var_path",
    "OOS_WINDOW_SPEC",
    "SYSTEM_SERIES_SPEC",
]

VARIANCE_KINDS = ("constant", "symmetric", "asymmetric")

# hard validity caps on the search space
MAX_ARMA_ORDER = 5
MAX_ARCH_ORDER = 5
MAX_GARCH_ORDER = 1

_MIN_FIT_LENGTH = 250
_MIN_SELECT_LENGTH = 500
_STATIONARITY_CEILING = 0.9995
_SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class ArmaGarchSpec:
    """Model structure: ARMA(ar, ma) mean plus the chosen variance equation.

    variance "constant" fits a single scale, "symmetric" a GARCH(arch, garch)
    and "asymmetric" a GJR-GARCH(arch, garch) with one sign term per ARCH lag.
    """

    ar: int = 0
    ma: int = 0
    arch: int = 0
    garch: int = 0
    include_mean: bool = True
    variance: str = "constant"

    def __post_init__(self) -> None:
        if self.variance not in VARIANCE_KINDS:
            raise ValueError(f"variance must be one of {VARIANCE_KINDS}, got {self.variance!r}")
        if not (0 <= self.ar <= MAX_ARMA_ORDER and 0 <= self.ma <= MAX_ARMA_ORDER):
            raise ValueError(f"ar and ma orders must lie in [0, {MAX_ARMA_ORDER}]")
        if self.variance == "constant":
            if self.arch or self.garch:
                raise ValueError("constant variance admits no arch/garch terms")
        else:
            if not 1 <= self.arch <= MAX_ARCH_ORDER:
                raise ValueError(f"arch order must lie in [1, {MAX_ARCH_ORDER}]")
            if not 0 <= self.garch <= MAX_GARCH_ORDER:
                raise ValueError(f"garch order must lie in [0, {MAX_GARCH_ORDER}]")

    @property
    def n_params(self) -> int:
        k = int(self.include_mean) + self.ar + self.ma + 2  # + skew, shape
        if self.variance == "constant":
            return k + 1
        if self.variance == "symmetric":
            return k + 1 + self.arch + self.garch
        return k + 1 + 2 * self.arch + self.garch

    def label(self) -> str:
        mean = f"ARMA({self.ar},{self.ma})" + ("" if self.include_mean else ", zero level")
        if self.variance == "constant":
            return f"{mean}, constant variance"
        kind = "GARCH" if self.variance == "symmetric" else "GJR-GARCH"
        return f"{mean} + {kind}({self.arch},{self.garch})"


@dataclass(frozen=True)
class FittedMarginal:
    """Frozen result of a univariate ML fit.

    Paths are aligned with the input series: sigma_path[t] is the conditional
    standard deviation for date t, z[t] the standardized residual.
    """

    spec: ArmaGarchSpec
    mean_level: float
    ar_coefs: np.ndarray
    ma_coefs: np.ndarray
    var_intercept: float
    arch_coefs: np.ndarray
    asym_coefs: np.ndarray
    garch_coefs: np.ndarray
    innovation: SkewTParams
    loglik: float
    aic: float
    series: np.ndarray
    residuals: np.ndarray
    sigma_path: np.ndarray
    z: np.ndarray
    std_errors: dict[str, float]
    converged: bool
    notes: tuple[str, ...] = ()

    @property
    def n_obs(self) -> int:
        return self.series.shape[0]

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    @property
    def mean_path(self) -> np.ndarray:
        return self.series - self.residuals

    def coefficients(self) -> dict[str, float]:
        out: dict[str, float] = {}
        if self.spec.include_mean:
            out["mean"] = self.mean_level
        for i, v in enumerate(self.ar_coefs, 1):
            out[f"ar{i}"] = float(v)
        for i, v in enumerate(self.ma_coefs, 1):
            out[f"ma{i}"] = float(v)
        out["var_intercept"] = self.var_intercept
        for i, v in enumerate(self.arch_coefs, 1):
            out[f"arch{i}"] = float(v)
        for i, v in enumerate(self.asym_coefs, 1):
            out[f"asym{i}"] = float(v)
        for i, v in enumerate(self.garch_coefs, 1):
            out[f"garch{i}"] = float(v)
        out["skewness"] = self.innovation.skewness
        out["shape"] = self.innovation.shape
        return out

    def to_record(self) -> dict:
        return {
            "spec": {
                "ar": self.spec.ar,
                "ma": self.spec.ma,
                "arch": self.spec.arch,
                "garch": self.spec.garch,
                "include_mean": self.spec.include_mean,
                "variance": self.spec.variance,
            },
            "coefficients": self.coefficients(),
            "std_errors": dict(self.std_errors),
            "loglik": self.loglik,
            "aic": self.aic,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "notes": list(self.notes),
        }

    def summary(self) -> str:
        lines = [self.spec.label(), "-" * len(self.spec.label())]
        ses = self.std_errors
        for name, value in self.coefficients().items():
            se = ses.get(name, float("nan"))
            lines.append(f"{name:>14s}  {value: .6g}  (se {se:.3g})")
        lines.append(f"loglik {self.loglik:.4f}   aic {self.aic:.4f}   n {self.n_obs}")
        if self.notes:
            lines.extend("note: " + n for n in self.notes)
        return "\n".join(lines)


# fixed specifications used by the pipeline stages
OOS_WINDOW_SPEC = ArmaGarchSpec(ar=0, ma=0, arch=1, garch=1, include_mean=False, variance="asymmetric")
SYSTEM_SERIES_SPEC = ArmaGarchSpec(ar=0, ma=0, arch=1, garch=1, include_mean=True, variance="symmetric")


def _check_series(x, min_len: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] < min_len:
        raise DataError(f"series too short: need at least {min_len} points, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DataError("series contains missing or non-finite values")
    return x


def _arma_residuals(x: np.ndarray, mu: float, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    # eps_t = (x_t - mu) - sum_i phi_i (x_{t-i} - mu) - sum_j psi_j eps_{t-j},
    # presample terms zero
    return signal.lfilter(np.r_[1.0, -phi], np.r_[1.0, psi], x - mu)


def _variance_path(
    eps: np.ndarray,
    omega: float,
    lam: np.ndarray,
    gam: np.ndarray,
    delta: np.ndarray,
    sig2_init: float,
) -> np.ndarray:
    n = eps.shape[0]
    if lam.size == 0:
        return np.full(n, omega)
    e2 = eps * eps
    neg = (eps <= 0.0).astype(float)
    forcing = np.full(n, omega)
    for i in range(lam.size):
        k = i + 1
        forcing[k:] += (lam[i] + gam[i] * neg[: n - k]) * e2[: n - k]
    if delta.size == 0:
        sig2 = forcing.copy()
        sig2[0] = sig2_init
        return sig2
    d = float(delta[0])
    zi = signal.lfiltic([1.0], [1.0, -d], y=[sig2_init])
    tail, _ = signal.lfilter([1.0], [1.0, -d], forcing[1:], zi=zi)
    return np.concatenate([[sig2_init], tail])


def _filter_paths(x, spec, mu, phi, psi, omega, lam, gam, delta, sig2_init):
    eps = _arma_residuals(x, mu, phi, psi)
    sig2 = _variance_path(eps, omega, lam, gam, delta, sig2_init)
    return eps, sig2


class _ParamLayout:
    """Maps between the optimizer vector and named model parameters.

    Scale-free pieces (AR/MA, arch/asym/garch, skew, shape) are shared between
    the standardized and original data scales; the level and variance
    intercept live on the standardized scale inside the optimizer.
    """

    def __init__(self, spec: ArmaGarchSpec):
        self.spec = spec
        names: list[str] = []
        if spec.include_mean:
            names.append("mean")
        names += [f"ar{i}" for i in range(1, spec.ar + 1)]
        names += [f"ma{i}" for i in range(1, spec.ma + 1)]
        names.append("log_var_intercept")
        names += [f"arch{i}" for i in range(1, spec.arch + 1)]
        if spec.variance == "asymmetric":
            names += [f"asym{i}" for i in range(1, spec.arch + 1)]
        if spec.variance != "constant":
            names += [f"garch{i}" for i in range(1, spec.garch + 1)]
        names += ["log_skewness", "log_shape_excess"]
        self.names = names

    def bounds(self) -> list[tuple[float, float]]:
        out = []
        for name in self.names:
            if name == "mean":
                out.append((-5.0, 5.0))
            elif name == "log_var_intercept":
                out.append((math.log(1e-8), math.log(20.0)))
            # check the variance blocks before ar/ma: "arch1" also starts with "ar"
            elif name.startswith("arch"):
                out.append((0.0, 0.995))
            elif name.startswith("asym"):
                out.append((-0.995, 0.995))
            elif name.startswith("garch"):
                out.append((0.0, _STATIONARITY_CEILING))
            elif name.startswith(("ar", "ma")):
                out.append((-1.995, 1.995))
            elif name == "log_skewness":
                out.append((math.log(0.2), math.log(5.0)))
            else:  # log_shape_excess
                out.append((math.log(0.05), math.log(200.0)))
        return out

    def unpack(self, theta: np.ndarray):
        spec = self.spec
        pos = 0

        def take(k):
            nonlocal pos
            block = np.asarray(theta[pos : pos + k], dtype=float)
            pos += k
            return block

        mu = float(take(1)[0]) if spec.include_mean else 0.0
        phi = take(spec.ar)
        psi = take(spec.ma)
        omega = math.exp(float(take(1)[0]))
        lam = take(spec.arch)
        gam = take(spec.arch) if spec.variance == "asymmetric" else np.zeros(spec.arch)
        delta = take(spec.garch) if spec.variance != "constant" else np.zeros(0)
        skew = math.exp(float(take(1)[0]))
        shape = 2.0 + math.exp(float(take(1)[0]))
        return mu, phi, psi, omega, lam, gam, delta, skew, shape

    def start(self, x_std: np.ndarray) -> np.ndarray:
        spec = self.spec
        v = float(np.var(x_std))
        vals: list[float] = []
        if spec.include_mean:
            vals.append(float(np.mean(x_std)))
        vals += [0.02] * spec.ar
        vals += [0.02] * spec.ma
        if spec.variance == "constant":
            vals.append(math.log(max(v, 1e-6)))
        else:
            persistence = 0.9 if spec.garch else 0.4
            vals.append(math.log(max(v * (1.0 - persistence), 1e-6)))
        if spec.variance != "constant":
            vals += [0.08 / spec.arch] * spec.arch
            if spec.variance == "asymmetric":
                vals += [0.04 / spec.arch] * spec.arch
            vals += [0.82] * spec.garch
        vals += [0.0, math.log(6.0 - 2.0)]
        return np.array(vals)

    def restart(self, x_std: np.ndarray) -> np.ndarray:
        theta = self.start(x_std)
        spec = self.spec
        if spec.variance != "constant":
            names = self.names
            for i, name in enumerate(names):
                if name.startswith("arch"):
                    theta[i] = 0.18 / spec.arch
                elif name.startswith("garch"):
                    theta[i] = 0.55
                elif name == "log_var_intercept":
                    theta[i] = math.log(max(float(np.var(x_std)) * 0.35, 1e-6))
        return theta


def _rational_poly_unstable(coefs: np.ndarray) -> float:
    """Excess by which any root of 1 - c1 z - ... - ck z^k falls inside the
    unit circle (0 when stable).  Works for the MA polynomial via sign flip."""
    if coefs.size == 0:
        return 0.0
    roots = np.roots(np.r_[-coefs[::-1], 1.0])
    if roots.size == 0:
        return 0.0
    m = np.abs(roots).min()
    return max(0.0, 1.02 - m)


def _penalties(phi, psi, lam, gam, delta) -> float:
    pen = 0.0
    pen += 1e5 * _rational_poly_unstable(phi) ** 2
    pen += 1e5 * _rational_poly_unstable(-psi) ** 2
    station = lam.sum() + 0.5 * gam.sum() + delta.sum()
    if station > _STATIONARITY_CEILING:
        pen += 1e5 * (station - _STATIONARITY_CEILING) ** 2 + 10.0 * (station - _STATIONARITY_CEILING)
    shortf = np.minimum(lam + gam, 0.0)
    pen += 1e6 * float(shortf @ shortf)
    return pen


def _negloglik(theta, x_std, layout, sig2_init):
    mu, phi, psi, omega, lam, gam, delta, skew, shape = layout.unpack(theta)
    pen = _penalties(phi, psi, lam, gam, delta)
    # explosive trial points overflow harmlessly; the finiteness guard catches them
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        eps, sig2 = _filter_paths(x_std, layout.spec, mu, phi, psi, omega, lam, gam, delta, sig2_init)
        sig2 = np.maximum(sig2, _SIGMA2_FLOOR)
        sig = np.sqrt(sig2)
        z = eps / sig
        ll = float(np.sum(skew_t_logpdf(z, SkewTParams(skew, shape))) - np.sum(np.log(sig)))
    if not math.isfinite(ll):
        return 1e12
    return -ll + pen


def fit(series, spec: ArmaGarchSpec) -> FittedMarginal:
    """ML fit of the spec on a return series.

    Raises FitError when the optimizer fails or the covariance-stationarity
    constraint is violated at the optimum, DataError on unusable input.
    """
    x = _check_series(series, _MIN_FIT_LENGTH)
    scale = float(np.std(x))
    if scale <= 0.0:
        raise DataError("series is constant; nothing to fit")
    x_std = x / scale
    sig2_init = float(np.var(x_std, ddof=1))
    layout = _ParamLayout(spec)
    bounds = layout.bounds()

    best = None
    for theta0 in (layout.start(x_std), layout.restart(x_std)):
        res = optimize.minimize(
            _negloglik,
            theta0,
            args=(x_std, layout, sig2_init),
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 500, "ftol": 1e-12},
        )
        if best is None or res.fun < best.fun:
            best = res
        if best.success and best.fun < 1e11:
            break
    if best is None or not math.isfinite(best.fun) or best.fun >= 1e11:
        raise FitError(f"{spec.label()}: optimizer failed to produce a finite likelihood")

    mu, phi, psi, omega, lam, gam, delta, skew, shape = layout.unpack(best.x)
    station = float(lam.sum() + 0.5 * gam.sum() + delta.sum())
    if spec.variance != "constant" and station >= 1.0:
        raise FitError(f"{spec.label()}: stationarity constraint violated at optimum (sum {station:.4f})")
    if np.any(lam + gam < -1e-10):
        raise FitError(f"{spec.label()}: negative net shock response at optimum")
    # snap optimizer float noise so every shock response is exactly nonnegative
    gam = np.maximum(gam, -lam)

    eps_std, sig2_std = _filter_paths(x_std, spec, mu, phi, psi, omega, lam, gam, delta, sig2_init)
    sig2_std = np.maximum(sig2_std, _SIGMA2_FLOOR)
    n = x.shape[0]
    ll = -float(best.fun) - n * math.log(scale)
    # subtract any penalty residue so reported loglik is the pure likelihood
    pen = _penalties(phi, psi, lam, gam, delta)
    ll += pen

    notes: list[str] = []
    z = eps_std / np.sqrt(sig2_std)
    z_var = float(np.var(z, ddof=1))
    if not 0.8 <= z_var <= 1.2:
        notes.append(f"standardized residual variance {z_var:.3f} outside [0.8, 1.2]")
    if pen > 1e-8:
        notes.append("soft constraint penalty active at optimum")
    if not best.success:
        notes.append(f"optimizer status: {best.message}")

    fitted = FittedMarginal(
        spec=spec,
        mean_level=mu * scale,
        ar_coefs=phi,
        ma_coefs=psi,
        var_intercept=omega * scale * scale,
        arch_coefs=lam,
        asym_coefs=gam if spec.variance == "asymmetric" else np.zeros(0),
        garch_coefs=delta,
        innovation=SkewTParams(skew, shape),
        loglik=ll,
        aic=2.0 * spec.n_params - 2.0 * ll,
        series=x,
        residuals=eps_std * scale,
        sigma_path=np.sqrt(sig2_std) * scale,
        z=z,
        std_errors=_standard_errors(best.x, x_std, layout, sig2_init, scale),
        converged=bool(best.success),
        notes=tuple(notes),
    )
    return fitted


def _standard_errors(theta_hat, x_std, layout, sig2_init, scale) -> dict[str, float]:
    """Asymptotic standard errors from a central-difference Hessian of the
    negative loglik, mapped back to the original data scale."""
    k = theta_hat.shape[0]
    h = np.maximum(1e-4, 1e-4 * np.abs(theta_hat))
    hess = np.empty((k, k))
    f0 = _negloglik(theta_hat, x_std, layout, sig2_init)

    def f(v):
        return _negloglik(v, x_std, layout, sig2_init)

    try:
        for i in range(k):
            ei = np.zeros(k)
            ei[i] = h[i]
            hess[i, i] = (f(theta_hat + ei) - 2.0 * f0 + f(theta_hat - ei)) / (h[i] * h[i])
            for j in range(i + 1, k):
                ej = np.zeros(k)
                ej[j] = h[j]
                hess[i, j] = hess[j, i] = (
                    f(theta_hat + ei + ej) - f(theta_hat + ei - ej) - f(theta_hat - ei + ej) + f(theta_hat - ei - ej)
                ) / (4.0 * h[i] * h[j])
        cov = np.linalg.pinv(hess)
        var = np.clip(np.diag(cov), 0.0, None)
        se_opt = np.sqrt(var)
    except (np.linalg.LinAlgError, FloatingPointError):
        se_opt = np.full(k, np.nan)

    out: dict[str, float] = {}
    theta = np.asarray(theta_hat, dtype=float)
    for name, se, val in zip(layout.names, se_opt, theta):
        if name == "mean":
            out["mean"] = float(se * scale)
        elif name == "log_var_intercept":
            # delta method through exp, then the scale factor
            out["var_intercept"] = float(se * math.exp(val) * scale * scale)
        elif name == "log_skewness":
            out["skewness"] = float(se * math.exp(val))
        elif name == "log_shape_excess":
            out["shape"] = float(se * math.exp(val))
        else:
            out[name] = float(se)
    return out


def forecast_one_step(fitted: FittedMarginal) -> tuple[float, float]:
    """One-day-ahead conditional mean and standard deviation."""
    x = fitted.series
    eps = fitted.residuals
    sig2 = fitted.sigma_path**2
    mu = fitted.mean_level
    n = x.shape[0]
    mean_next = mu
    for i, coef in enumerate(fitted.ar_coefs, 1):
        mean_next += coef * (x[n - i] - mu)
    for j, coef in enumerate(fitted.ma_coefs, 1):
        mean_next += coef * eps[n - j]
    if fitted.spec.variance == "constant":
        return float(mean_next), math.sqrt(fitted.var_intercept)
    var_next = fitted.var_intercept
    gam = fitted.asym_coefs if fitted.asym_coefs.size else np.zeros_like(fitted.arch_coefs)
    for i, coef in enumerate(fitted.arch_coefs, 1):
        shock = eps[n - i]
        var_next += (coef + gam[i - 1] * (shock <= 0.0)) * shock * shock
    for j, coef in enumerate(fitted.garch_coefs, 1):
        var_next += coef * sig2[n - j]
    return float(mean_next), math.sqrt(var_next)


def refilter(fitted: FittedMarginal, series) -> FittedMarginal:
    """Apply an already-fitted model's parameters to a different series.

    Replays the residual and variance recursions on the new data so forecasts
    and PIT values reflect it; coefficients, innovation parameters, and the
    reported likelihood stay those of the original fit.
    """
    x = _check_series(series, 2)
    gam = fitted.asym_coefs if fitted.asym_coefs.size else np.zeros_like(fitted.arch_coefs)
    eps, sig2 = _filter_paths(
        x,
        fitted.spec,
        fitted.mean_level,
        fitted.ar_coefs,
        fitted.ma_coefs,
        fitted.var_intercept,
        fitted.arch_coefs,
        gam,
        fitted.garch_coefs,
        float(np.var(x, ddof=1)),
    )
    sig = np.sqrt(np.maximum(sig2, _SIGMA2_FLOOR))
    return replace(fitted, series=x, residuals=eps, sigma_path=sig, z=eps / sig)


def _autocorrelations(x: np.ndarray, lags: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    c = x - x.mean()
    denom = float(c @ c)
    if denom <= 0.0:
        raise DataError("series has zero variance; autocorrelations undefined")
    return np.array([float(c[k:] @ c[: n - k]) / denom for k in range(1, lags + 1)])


def ljung_box(x, lags: int = 8, dof_reduction: int = 0) -> float:
    """Portmanteau p-value for no autocorrelation up to the given lag count.

    The chi-square reference has lags - dof_reduction degrees of freedom; pass
    the number of fitted ARMA coefficients when testing model residuals.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.shape[0]
    if lags <= dof_reduction:
        raise DataError(f"lags ({lags}) must exceed dof_reduction ({dof_reduction})")
    if lags >= n:
        raise DataError("lags must be smaller than the series length")
    rho = _autocorrelations(x, lags)
    k = np.arange(1, lags + 1)
    statistic = n * (n + 2.0) * float(np.sum(rho * rho / (n - k)))
    return float(stats.chi2.sf(statistic, lags - dof_reduction))


def mcleod_li(x, lags: int = 8, dof_reduction: int = 0) -> float:
    """Ljung-Box applied to squared values; detects conditional
    heteroskedasticity left in residuals."""
    x = np.asarray(x, dtype=float).ravel()
    return ljung_box(x * x, lags, dof_reduction)


def weighted_li_mak(fitted: FittedMarginal, lags: int = 8) -> float:
    """Weighted portmanteau test on squared standardized residuals.

    Lags up to the fitted variance order carry no information after GARCH
    filtering and are skipped; remaining lags get linearly decaying weights
    and the null distribution is a moment-matched gamma law.
    """
    f = fitted.spec.arch + fitted.spec.garch
    if fitted.spec.variance == "constant":
        f = 0
    if lags <= f:
        raise DataError(f"lags ({lags}) must exceed the fitted variance order ({f})")
    z2 = fitted.z**2
    n = z2.shape[0]
    rho = _autocorrelations(z2, lags)
    k = np.arange(f + 1, lags + 1)
    w = (lags - k + f + 1) / lags
    statistic = n * float(np.sum(w * rho[f:] ** 2))
    mean_w = float(np.sum(w))
    var_w = 2.0 * float(np.sum(w * w))
    return float(stats.gamma.sf(statistic, a=mean_w**2 / var_w, scale=var_w / mean_w))


@dataclass(frozen=True)
class SignBiasResult:
    sign: float
    negative_size: float
    positive_size: float
    joint: float

    def worst(self) -> float:
        return min(self.sign, self.negative_size, self.positive_size, self.joint)


def sign_bias_tests(fitted: FittedMarginal) -> SignBiasResult:
    """Auxiliary regression of squared standardized residuals on lagged shock
    sign and size; returns the three slope p-values and the joint F p-value."""
    eps = fitted.residuals
    z2 = fitted.z**2
    lagged = eps[:-1]
    y = z2[1:]
    neg = (lagged < 0.0).astype(float)
    if neg.sum() == 0 or neg.sum() == neg.shape[0]:
        raise DataError("all residuals share one sign; sign-bias regression is degenerate")
    if float(np.var(y)) <= 0.0:
        raise DataError("squared standardized residuals are constant")
    xmat = np.column_stack([np.ones_like(lagged), neg, neg * lagged, (1.0 - neg) * lagged])
    n, p = xmat.shape
    beta, *_ = np.linalg.lstsq(xmat, y, rcond=None)
    resid = y - xmat @ beta
    rss = float(resid @ resid)
    dof = n - p
    s2 = rss / dof
    cov = s2 * np.linalg.inv(xmat.T @ xmat)
    tstats = beta / np.sqrt(np.diag(cov))
    pvals = 2.0 * stats.t.sf(np.abs(tstats), dof)
    rss0 = float(np.sum((y - y.mean()) ** 2))
    fstat = ((rss0 - rss) / (p - 1)) / s2
    joint = float(stats.f.sf(fstat, p - 1, dof))
    return SignBiasResult(float(pvals[1]), float(pvals[2]), float(pvals[3]), joint)


def _selection_grid(max_ar, max_ma, variance, arch_orders, garch_orders):
    specs = []
    for include_mean in (True, False):
        for ar in range(max_ar + 1):
            for ma in range(max_ma + 1):
                if variance == "constant":
                    specs.append(ArmaGarchSpec(ar, ma, 0, 0, include_mean, "constant"))
                else:
                    for arch in arch_orders:
                        for garch in garch_orders:
                            specs.append(ArmaGarchSpec(ar, ma, arch, garch, include_mean, variance))
    return specs


def _fit_candidates(x, specs):
    fits = []
    for spec in specs:
        try:
            fits.append(fit(x, spec))
        except FitError:
            continue
    if not fits:
        raise FitError("no candidate model produced a finite fit")
    return fits


def _complexity_key(fitted: FittedMarginal):
    return (fitted.aic, fitted.n_params, fitted.spec.ar + fitted.spec.ma)


def _pick(fits, passes) -> tuple[FittedMarginal, bool]:
    passing = [f for f, ok in zip(fits, passes) if ok]
    if passing:
        return min(passing, key=_complexity_key), True
    return min(fits, key=_complexity_key), False


def select_model(
    series,
    *,
    level: float = 0.05,
    lags: int = 8,
    max_ar: int = 2,
    max_ma: int = 2,
    max_arch: int = 2,
    max_garch: int = 1,
) -> FittedMarginal:
    """Staged model selection on a return series.

    Stage one searches constant-variance ARMA models and keeps those whose
    residuals pass the autocorrelation test; the lowest-AIC survivor is
    checked for conditional heteroskedasticity, which if found escalates to a
    GARCH search (autocorrelation plus weighted squared-residual tests), and
    a sign-bias rejection there escalates once more to the asymmetric family.
    Every structure is tried both with a free level and with the level pinned
    to zero.  When no candidate passes a stage's tests the lowest-AIC model
    proceeds, flagged with a note.
    """
    x = _check_series(series, _MIN_SELECT_LENGTH)
    if not 0 <= max_ar <= MAX_ARMA_ORDER or not 0 <= max_ma <= MAX_ARMA_ORDER:
        raise DataError(f"max_ar/max_ma must lie in [0, {MAX_ARMA_ORDER}]")
    if not 1 <= max_arch <= MAX_ARCH_ORDER or not 0 <= max_garch <= MAX_GARCH_ORDER:
        raise DataError("invalid variance-order caps")

    def lb_pass(f: FittedMarginal) -> bool:
        reduction = min(f.spec.ar + f.spec.ma, lags - 1)
        return ljung_box(f.z, lags, reduction) > level

    notes: list[str] = []

    # stage one: ARMA with constant variance, serial-correlation screen
    stage1 = _fit_candidates(x, _selection_grid(max_ar, max_ma, "constant", (), ()))
    chosen, clean = _pick(stage1, [lb_pass(f) for f in stage1])
    if not clean:
        notes.append("no constant-variance candidate passed the autocorrelation screen")
    if mcleod_li(chosen.z, lags) > level:
        return replace(chosen, notes=chosen.notes + tuple(notes)) if notes else chosen

    # stage two: symmetric GARCH, adding the weighted squared-residual screen
    arch_orders = tuple(range(1, max_arch + 1))
    garch_orders = tuple(range(0, max_garch + 1))
    stage2 = _fit_candidates(x, _selection_grid(max_ar, max_ma, "symmetric", arch_orders, garch_orders))
    passes2 = [lb_pass(f) and weighted_li_mak(f, lags) > level for f in stage2]
    chosen, clean = _pick(stage2, passes2)
    if not clean:
        notes.append("no symmetric-variance candidate passed the diagnostic screens")
    try:
        asymmetric_needed = sign_bias_tests(chosen).joint <= level
    except DataError:
        asymmetric_needed = False
    if not asymmetric_needed:
        return replace(chosen, notes=chosen.notes + tuple(notes)) if notes else chosen

    # stage three: asymmetric variance, all three screens
    stage3 = _fit_candidates(x, _selection_grid(max_ar, max_ma, "asymmetric", arch_orders, garch_orders))

    def sb_pass(f: FittedMarginal) -> bool:
        try:
            return sign_bias_tests(f).joint > level
        except DataError:
            return False

    passes3 = [lb_pass(f) and weighted_li_mak(f, lags) > level and sb_pass(f) for f in stage3]
    chosen, clean = _pick(stage3, passes3)
    if not clean:
        notes.append("no asymmetric-variance candidate passed all diagnostic screens")
    return replace(chosen, notes=chosen.notes + tuple(notes)) if notes else chosen


def var_path(fitted: FittedMarginal, alpha: float) -> np.ndarray:
    """In-sample value-at-risk series: conditional mean plus scaled quantile."""
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    q = skew_t_quantile(alpha, fitted.innovation)
    return fitted.mean_path + fitted.sigma_path * q


def var_parametric(fitted: FittedMarginal, alpha: float, t: int) -> float:
    """Value-at-risk for one date index of the fitted sample."""
    path = var_path(fitted, alpha)
    n = path.shape[0]
    if not -n <= t < n:
        raise DataError(f"date index {t} out of range for {n} observations")
    return float(path[t])
