"""Violation-rate evaluation of the conditional risk measures.

Two entry points:

* ``insample_rates`` scores already-computed measure series against realized
  returns, counting violations only on dates where each measure's
  conditioning event holds;
* ``rolling_forecast`` runs the one-day-ahead moving-window pipeline: refit
  marginals and copula on each window, solve the measure on the copula scale,
  map through the next-day forecast quantile, then score against the realized
  return.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .copulas.fitting import fit_ml
from .distributions import pit, skew_t_quantile
from .errors import DataError, FitError
from .ingest import system_label
from .marginal import OOS_WINDOW_SPEC, fit, forecast_one_step, refilter
from .risk import ProbLevels, RiskSeries, solve_u

__all__ = [
    "ROLLING_FAMILIES",
    "RollingConfig",
    "ViolationReport",
    "insample_rates",
    "rolling_forecast",
    "system_label",
]

_LOG = logging.getLogger(__name__)

ROLLING_FAMILIES = ("gaussian", "student_t", "clayton", "gumbel")
_CONDITIONAL_MEASURES = ("CoVaR", "SCoVaR", "MCoVaR", "VCoVaR")


@dataclass(frozen=True)
class ViolationReport:
    """Violation count of one measure among its condition-satisfying dates.

    ``rate`` is None when no date satisfied the conditioning event.  ``level``
    is the tail probability the rate should sit near.
    """

    measure: str
    target: str
    conditioning: tuple[str, ...]
    condition_count: int
    violation_count: int
    rate: float | None
    level: float
    copula_family: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        if not 0 <= self.violation_count <= self.condition_count:
            raise DataError(
                f"violation count {self.violation_count} outside [0, {self.condition_count}]"
            )
        if self.condition_count == 0:
            if self.rate is not None:
                raise DataError("rate must be the undefined marker when no date qualifies")
        elif self.rate is None or not 0.0 <= self.rate <= 1.0:
            raise DataError(f"rate must lie in [0, 1], got {self.rate}")

    def to_record(self) -> dict:
        return {
            "measure": self.measure,
            "target": self.target,
            "conditioning": "|".join(self.conditioning),
            "copula": self.copula_family if self.copula_family is not None else "",
            "condition_count": self.condition_count,
            "violation_count": self.violation_count,
            "rate": float("nan") if self.rate is None else self.rate,
            "level": self.level,
        }


def _count_report(measure, target, conditioning, cond, viol, level, family=None) -> ViolationReport:
    count = int(np.sum(cond))
    hits = int(np.sum(cond & viol))
    return ViolationReport(
        measure=measure,
        target=target,
        conditioning=tuple(conditioning),
        condition_count=count,
        violation_count=hits,
        rate=hits / count if count else None,
        level=level,
        copula_family=family,
    )


def _aligned_returns(returns: Mapping[str, np.ndarray]) -> tuple[dict, int]:
    if not returns:
        raise DataError("no return series supplied")
    out = {}
    n = None
    for name, x in returns.items():
        arr = np.asarray(x, dtype=float).ravel()
        if n is None:
            n = arr.shape[0]
        elif arr.shape[0] != n:
            raise DataError(f"return series {name!r} has length {arr.shape[0]}, expected {n}")
        out[str(name)] = arr
    return out, int(n)


def insample_rates(
    returns: Mapping[str, np.ndarray],
    risk: Iterable[RiskSeries],
    var: Iterable[RiskSeries],
) -> list[ViolationReport]:
    """Violation reports for measure series evaluated on realized returns.

    ``var`` supplies one VaR series per series name; a measure's conditioning
    event compares each conditioning return against that series' VaR, so the
    VaR level must equal the measure's conditioning level.  The sum-based
    measure additionally needs entries named by ``system_label`` in both
    ``returns`` and ``var``.
    """
    data, n = _aligned_returns(returns)
    var_map: dict[str, RiskSeries] = {}
    for series in var:
        if series.measure != "VaR":
            raise DataError(f"var entries must be VaR series, got {series.measure!r}")
        if series.target in var_map:
            raise DataError(f"duplicate VaR series for {series.target!r}")
        if series.n_obs != n:
            raise DataError(f"VaR series for {series.target!r} has length {series.n_obs}, expected {n}")
        var_map[series.target] = series

    reports: list[ViolationReport] = []
    for series in var_map.values():
        if series.target not in data:
            raise DataError(f"VaR series for unknown return series {series.target!r}")
        viol = data[series.target] <= series.values
        reports.append(
            _count_report("VaR", series.target, (), np.ones(n, dtype=bool), viol, series.levels.beta)
        )

    for series in risk:
        if series.measure not in _CONDITIONAL_MEASURES:
            raise DataError(f"risk entries must be conditional measures, got {series.measure!r}")
        if series.n_obs != n:
            raise DataError(f"{series.measure} series has length {series.n_obs}, expected {n}")
        if series.target not in data:
            raise DataError(f"{series.measure} targets unknown series {series.target!r}")
        if not series.conditioning:
            raise DataError(f"{series.measure} series carries no conditioning names")
        event_names = (
            (system_label(series.conditioning),) if series.measure == "SCoVaR" else series.conditioning
        )
        hits = np.empty((n, len(event_names)), dtype=bool)
        for k, name in enumerate(event_names):
            if name not in data:
                raise DataError(f"conditioning series {name!r} missing from returns")
            if name not in var_map:
                raise DataError(f"no VaR series supplied for conditioning series {name!r}")
            threshold = var_map[name]
            if threshold.levels.beta != series.levels.alpha:
                raise DataError(
                    f"VaR level {threshold.levels.beta} for {name!r} does not match "
                    f"the conditioning level {series.levels.alpha}"
                )
            hits[:, k] = data[name] <= threshold.values
        cond = hits.any(axis=1) if series.measure == "VCoVaR" else hits.all(axis=1)
        viol = data[series.target] <= series.values
        reports.append(
            _count_report(series.measure, series.target, series.conditioning, cond, viol, series.levels.beta)
        )
    return reports


@dataclass(frozen=True)
class RollingConfig:
    """Moving-window one-day-ahead forecasting setup."""

    window: int = 500
    levels: ProbLevels = field(default_factory=ProbLevels)
    family: str = "student_t"
    measures: tuple[str, ...] = _CONDITIONAL_MEASURES
    refit_stride: int = 1

    def __post_init__(self):
        if self.window < 250:
            raise DataError(f"window must be at least 250 observations, got {self.window}")
        if self.family not in ROLLING_FAMILIES:
            raise DataError(f"family must be one of {ROLLING_FAMILIES}, got {self.family!r}")
        measures = tuple(self.measures)
        if not measures or any(m not in _CONDITIONAL_MEASURES for m in measures):
            raise DataError(f"measures must be a nonempty subset of {_CONDITIONAL_MEASURES}")
        if len(set(measures)) != len(measures):
            raise DataError("measures must not repeat")
        object.__setattr__(self, "measures", measures)
        if self.refit_stride < 1:
            raise DataError(f"refit_stride must be >= 1, got {self.refit_stride}")


def _fit_window(name, window_data, previous, t):
    try:
        return fit(window_data, OOS_WINDOW_SPEC)
    except FitError as exc:
        if previous is None:
            raise FitError(f"first window fit failed for {name!r}: {exc}") from exc
        _LOG.warning(
            "window ending at index %d: marginal fit for %r failed (%s); carrying forward previous parameters",
            t, name, exc,
        )
        return refilter(previous, window_data)


def rolling_forecast(
    returns: Mapping[str, np.ndarray],
    target: str,
    conditioning: Iterable[str],
    config: RollingConfig | None = None,
    *,
    dates: np.ndarray | None = None,
) -> tuple[list[RiskSeries], list[ViolationReport]]:
    """One-day-ahead forecasts and violation reports over moving windows.

    Every window refits the asymmetric GARCH marginals and the configured
    copula family, solves each measure on the copula scale, and maps the root
    through the target's forecast quantile.  ``refit_stride`` spaces out the
    refits; between refits the previous parameters are replayed on the
    current window so forecasts always use all data through the prior day.
    Returned series and reports cover dates ``window .. n-1``.
    """
    cfg = config if config is not None else RollingConfig()
    data, n = _aligned_returns(returns)
    conditioning = tuple(str(c) for c in conditioning)
    if target not in data:
        raise DataError(f"target {target!r} missing from returns")
    if not conditioning:
        raise DataError("conditioning must name at least one series")
    if len(set(conditioning)) != len(conditioning) or target in conditioning:
        raise DataError("conditioning names must be distinct and exclude the target")
    missing = [c for c in conditioning if c not in data]
    if missing:
        raise DataError(f"conditioning series missing from returns: {missing}")
    if n <= cfg.window + 1:
        raise DataError(f"need more than {cfg.window + 1} observations, got {n}")
    if dates is not None:
        dates = np.asarray(dates)
        if dates.shape[0] != n:
            raise DataError("dates must align with the return series")

    lv = cfg.levels
    sys_key = system_label(conditioning)
    series_names = [target, *conditioning]
    if "SCoVaR" in cfg.measures:
        data[sys_key] = np.sum([data[c] for c in conditioning], axis=0)
        series_names.append(sys_key)

    # measure keys: (measure, conditioning names for the event)
    measure_keys: list[tuple[str, tuple[str, ...]]] = []
    for measure in cfg.measures:
        if measure == "CoVaR":
            measure_keys += [("CoVaR", (c,)) for c in conditioning]
        else:
            measure_keys.append((measure, conditioning))

    forecast_idx = np.arange(cfg.window, n)
    m = forecast_idx.shape[0]
    var_values = {name: np.empty(m) for name in series_names}
    measure_values = {key: np.empty(m) for key in measure_keys}

    marginals: dict[str, object] = {name: None for name in series_names}
    copulas: dict[object, object] = {}
    roots: dict[tuple[str, tuple[str, ...]], float] = {}

    for step, t in enumerate(forecast_idx):
        lo = t - cfg.window
        refit_due = (t - cfg.window) % cfg.refit_stride == 0
        for name in series_names:
            w = data[name][lo:t]
            if refit_due:
                marginals[name] = _fit_window(name, w, marginals[name], t)
            else:
                marginals[name] = refilter(marginals[name], w)

        if refit_due:
            pseudo = {name: pit(marginals[name].z, marginals[name].innovation) for name in series_names}
            for measure, names in measure_keys:
                cols = [pseudo[target], pseudo[sys_key]] if measure == "SCoVaR" else \
                    [pseudo[target], *(pseudo[c] for c in names)]
                key = (measure, names)
                try:
                    copulas[key] = fit_ml(np.column_stack(cols), cfg.family).copula
                except FitError as exc:
                    if key not in copulas:
                        raise FitError(f"first window copula fit failed for {key}: {exc}") from exc
                    _LOG.warning(
                        "window ending at index %d: copula fit for %s failed (%s); carrying forward",
                        t, key, exc,
                    )
                roots[key] = solve_u(measure, copulas[key], lv)

        for name in series_names:
            mu_next, sig_next = forecast_one_step(marginals[name])
            level = lv.beta if name == target else lv.alpha
            var_values[name][step] = mu_next + sig_next * float(
                skew_t_quantile(level, marginals[name].innovation)
            )
            if name == target:
                target_mu, target_sig = mu_next, sig_next
        for key in measure_keys:
            measure_values[key][step] = target_mu + target_sig * float(
                skew_t_quantile(roots[key], marginals[target].innovation)
            )

    out_dates = dates[forecast_idx] if dates is not None else forecast_idx
    series_out: list[RiskSeries] = []
    for name in series_names:
        level = lv.beta if name == target else lv.alpha
        series_out.append(
            RiskSeries("VaR", name, (), ProbLevels(level, level), var_values[name], out_dates)
        )
    for measure, names in measure_keys:
        series_out.append(
            RiskSeries(measure, target, names, lv, measure_values[measure, names], out_dates)
        )

    realized = {name: data[name][forecast_idx] for name in series_names}
    reports: list[ViolationReport] = []
    for name in series_names:
        level = lv.beta if name == target else lv.alpha
        viol = realized[name] <= var_values[name]
        reports.append(
            _count_report("VaR", name, (), np.ones(m, dtype=bool), viol, level, cfg.family)
        )
    hit = {name: realized[name] <= var_values[name] for name in series_names}
    target_viol = {key: realized[target] <= measure_values[key] for key in measure_keys}
    for measure, names in measure_keys:
        if measure == "SCoVaR":
            cond = hit[sys_key]
        else:
            stack = np.column_stack([hit[c] for c in names])
            cond = stack.any(axis=1) if measure == "VCoVaR" else stack.all(axis=1)
        reports.append(
            _count_report(measure, target, names, cond, target_viol[measure, names], lv.beta, cfg.family)
        )
    return series_out, reports
