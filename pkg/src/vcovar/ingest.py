"""Price ingestion and return-series plumbing.

Reads delimited closing-price files, aligns assets on common dates, turns
prices into log-returns, and produces the summary statistics and rank
correlation tables the pipeline reports.  Everything here is a pure
transformation; missing rows are dropped, never imputed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DataError
from .marginal import ljung_box

__all__ = [
    "ReturnSeries",
    "SystemSeries",
    "describe",
    "kendall_matrix",
    "load_prices",
    "system_label",
    "system_series",
    "to_log_returns",
]

_LOG = logging.getLogger(__name__)


def system_label(components: Iterable[str]) -> str:
    """Name of the aggregate series built by summing component returns."""
    return "sum(" + "+".join(components) + ")"


@dataclass(frozen=True)
class ReturnSeries:
    """Dated log-returns of one asset."""

    asset: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        dates = np.asarray(self.dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", dates)
        if values.ndim != 1 or values.shape[0] < 2:
            raise DataError(f"{self.asset}: need at least 2 return observations")
        if dates.shape != values.shape:
            raise DataError(f"{self.asset}: dates and values must have equal length")
        if not np.all(np.isfinite(values)):
            raise DataError(f"{self.asset}: returns contain missing or non-finite values")
        if not np.all(dates[1:] > dates[:-1]):
            raise DataError(f"{self.asset}: dates must be strictly increasing")

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SystemSeries:
    """Per-date sum of component log-returns."""

    components: tuple[str, ...]
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def label(self) -> str:
        return system_label(self.components)


def system_series(series: Sequence[ReturnSeries]) -> SystemSeries:
    """Sum aligned return series into the aggregate used by the sum-based measure."""
    if not series:
        raise DataError("need at least one component series")
    _check_aligned(series)
    total = np.sum([s.values for s in series], axis=0)
    return SystemSeries(tuple(s.asset for s in series), series[0].dates, total)


def _check_aligned(series: Sequence[ReturnSeries]) -> None:
    first = series[0]
    for other in series[1:]:
        if other.n_obs != first.n_obs or not np.array_equal(other.dates, first.dates):
            raise DataError(f"series {other.asset!r} is not aligned with {first.asset!r}")


def load_prices(
    path,
    schema: Mapping[str, object] | None = None,
    *,
    delimiter: str = ",",
) -> pd.DataFrame:
    """Aligned closing prices indexed by date.

    ``schema`` maps roles to column names: ``{"date": <column>, "prices":
    {out_name: column, ...}}``.  By default the date column is named ``date``
    and every other column is read as a price series under its own name.
    Rows with any missing or non-numeric price are dropped with a logged
    count.
    """
    schema = dict(schema) if schema is not None else {}
    date_col = str(schema.get("date", "date"))
    try:
        raw = pd.read_csv(path, sep=delimiter)
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise DataError(f"could not read price file {path}: {exc}") from exc
    if date_col not in raw.columns:
        raise DataError(f"price file {path} has no {date_col!r} column")

    price_cols = schema.get("prices")
    if price_cols is None:
        price_cols = {c: c for c in raw.columns if c != date_col}
    missing_cols = [c for c in dict(price_cols).values() if c not in raw.columns]
    if missing_cols:
        raise DataError(f"price file {path} is missing columns {missing_cols}")
    if not price_cols:
        raise DataError(f"price file {path} has no price columns")

    try:
        dates = pd.to_datetime(raw[date_col], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable dates in {path}: {exc}") from exc
    if dates.duplicated().any():
        dupes = dates[dates.duplicated()].dt.date.unique()
        raise DataError(f"duplicate dates in {path}: {list(dupes[:5])}")

    table = pd.DataFrame(
        {name: pd.to_numeric(raw[col], errors="coerce") for name, col in dict(price_cols).items()}
    )
    table.index = pd.DatetimeIndex(dates, name="date")
    table = table.sort_index()
    keep = table.notna().all(axis=1)
    dropped = int((~keep).sum())
    if dropped:
        _LOG.warning("%s: dropped %d rows with missing prices", path, dropped)
    table = table.loc[keep]
    if table.empty:
        raise DataError(f"price file {path} has no dates with complete prices")
    bad = (table <= 0.0).any()
    if bad.any():
        raise DataError(f"non-positive prices in {path} for {list(table.columns[bad])}")
    return table


def to_log_returns(prices: pd.DataFrame) -> list[ReturnSeries]:
    """Log-returns of each price column: r_t = ln(p_t / p_{t-1})."""
    if prices.shape[0] < 3:
        raise DataError("need at least 3 price rows to build a return series")
    values = prices.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise DataError("prices contain missing values")
    if np.any(values <= 0.0):
        raise DataError("log-returns need strictly positive prices")
    rets = np.diff(np.log(values), axis=0)
    dates = np.asarray(prices.index[1:])
    return [ReturnSeries(str(col), dates, rets[:, k]) for k, col in enumerate(prices.columns)]


def describe(series: ReturnSeries) -> dict:
    """Location, dispersion, shape, and serial-dependence summary.

    Kurtosis is the raw (non-excess) fourth standardized moment, so a normal
    sample sits near 3.
    """
    x = series.values
    if x.shape[0] < 30:
        raise DataError(f"{series.asset}: need at least 30 observations, got {x.shape[0]}")
    if float(np.var(x)) == 0.0:
        raise DataError(f"{series.asset}: constant series has no distribution shape")
    jb = stats.jarque_bera(x)
    return {
        "asset": series.asset,
        "n": int(x.shape[0]),
        "min": float(np.min(x)),
        "mean": float(np.mean(x)),
        "median": float(np.median(x)),
        "max": float(np.max(x)),
        "sd": float(np.std(x, ddof=1)),
        "skewness": float(stats.skew(x)),
        "kurtosis": float(stats.kurtosis(x, fisher=False)),
        "jarque_bera_p": float(jb.pvalue),
        "ljung_box_p": float(ljung_box(x, 8)),
    }


def kendall_matrix(series: Sequence[ReturnSeries]) -> pd.DataFrame:
    """Pairwise tie-adjusted rank correlations; symmetric with unit diagonal."""
    if not series:
        raise DataError("need at least one series")
    _check_aligned(series)
    names = [s.asset for s in series]
    k = len(series)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            tau = stats.kendalltau(series[i].values, series[j].values).statistic
            out[i, j] = out[j, i] = float(tau)
    return pd.DataFrame(out, index=names, columns=names)
