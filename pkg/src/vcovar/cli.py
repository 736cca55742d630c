"""Command-line pipeline driver.

Subcommands cover the five workflow stages: data summaries, in-sample measure
estimation, violation-rate validation, dependence curves and surfaces, and the
rolling out-of-sample backtest.  Configuration comes from an optional YAML file
plus flags; flags win.  Every run writes delimited tables into one output
directory together with a manifest recording the resolved configuration and a
checksum per artifact, so identical configurations produce identical bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .backtest import ROLLING_FAMILIES, RollingConfig, insample_rates, rolling_forecast
from .copulas.fitting import fit_ml
from .distributions import pit
from .errors import ConfigError, DataError, FitError, SolverError
from .ingest import describe, kendall_matrix, load_prices, system_label, to_log_returns
from .marginal import SYSTEM_SERIES_SPEC, ArmaGarchSpec, fit, select_model, var_path
from .risk import ProbLevels, RiskSeries, risk_series
from .simulation import SweepConfig, ValidationConfig, dependence_curve, hac_surface, validate_violation_rate

__all__ = [
    "OUTPUT_DIR_ENV",
    "RunConfig",
    "build_parser",
    "cmd_backtest",
    "cmd_curves",
    "cmd_describe",
    "cmd_measure",
    "cmd_simulate",
    "main",
    "resolve_config",
]

OUTPUT_DIR_ENV = "VCOVAR_OUT"

_EXIT_CODES = (
    (ConfigError, 2, "config"),
    (DataError, 3, "data"),
    (FitError, 4, "fit"),
    (SolverError, 5, "solver"),
)

# curve/surface studies have fixed family sets; estimation commands take the
# configured list
_CURVE_SPECS = (
    ("CoVaR", ("clayton", "gumbel", "gaussian", "student_t")),
    ("MCoVaR", ("clayton", "gumbel")),
    ("VCoVaR", ("clayton", "gumbel")),
)
_SURFACE_MEASURES = ("MCoVaR", "VCoVaR")
_SURFACE_GRID = tuple(np.round(np.linspace(0.1, 0.9, 17), 6))
_SIMULATE_MEASURES = ("CoVaR", "MCoVaR", "VCoVaR")
_SIMULATE_DEFAULT_FAMILIES = ("clayton", "gumbel")

_MARGINAL_KEYS = ("ar", "ma", "arch", "garch", "include_mean", "variance")


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one subcommand run."""

    data: Path | None = None
    schema: dict | None = None
    target: str | None = None
    conditioning: tuple[str, ...] = ()
    alpha: float = 0.05
    beta: float = 0.05
    copulas: tuple[str, ...] | None = None
    marginal: ArmaGarchSpec | None = None
    window: int = 500
    stride: int = 1
    seed: int = 0
    threads: int = 0
    sample_size: int = 10_000
    reps: int = 100
    taus: tuple[float, ...] = (0.25, 0.50, 0.75)
    out: Path = Path("vcovar_out")
    resume: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0 or not 0.0 < self.beta < 1.0:
            raise ConfigError(f"alpha and beta must lie in (0, 1), got {self.alpha}, {self.beta}")
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        if self.target is not None and self.target in self.conditioning:
            raise ConfigError(f"target {self.target!r} must not appear in the conditioning set")
        if len(set(self.conditioning)) != len(self.conditioning):
            raise ConfigError("conditioning assets must be distinct")
        if self.copulas is not None:
            object.__setattr__(self, "copulas", tuple(self.copulas))
            if not self.copulas:
                raise ConfigError("copula list must not be empty")
            if len(set(self.copulas)) != len(self.copulas):
                raise ConfigError("copula families must be distinct")
            unknown = [f for f in self.copulas if f not in ROLLING_FAMILIES]
            if unknown:
                raise ConfigError(f"unsupported copula families {unknown}; choose from {ROLLING_FAMILIES}")
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.threads < 0:
            raise ConfigError(f"threads must be >= 0, got {self.threads}")
        if self.sample_size < 100:
            raise ConfigError(f"sample_size must be >= 100, got {self.sample_size}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if not self.taus or not all(0.0 < t < 1.0 for t in self.taus):
            raise ConfigError(f"taus must be a nonempty list inside (0, 1), got {self.taus}")
        object.__setattr__(self, "out", Path(self.out))
        if self.data is not None:
            object.__setattr__(self, "data", Path(self.data))

    @property
    def levels(self) -> ProbLevels:
        return ProbLevels(self.alpha, self.beta)

    def families(self, default: tuple[str, ...]) -> tuple[str, ...]:
        return self.copulas if self.copulas is not None else default

    def to_record(self) -> dict:
        """JSON-safe view of the resolved configuration."""
        record: dict = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, ArmaGarchSpec):
                value = {k: getattr(value, k) for k in _MARGINAL_KEYS}
            record[f.name] = value
        if record["marginal"] is None:
            record["marginal"] = "auto"
        return record


# ---------------------------------------------------------------------------
# configuration resolution
# ---------------------------------------------------------------------------


def _load_yaml(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"could not read config file {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a mapping, got {type(raw).__name__}")
    return raw


def _parse_marginal(value) -> ArmaGarchSpec | None:
    if value is None or value == "auto":
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"marginal must be 'auto' or a mapping, got {value!r}")
    unknown = set(value) - set(_MARGINAL_KEYS)
    if unknown:
        raise ConfigError(f"unknown marginal keys {sorted(unknown)}; allowed: {list(_MARGINAL_KEYS)}")
    try:
        return ArmaGarchSpec(**value)
    except DataError as exc:
        raise ConfigError(f"invalid marginal spec: {exc}") from exc


def _parse_schema(value) -> dict | None:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"schema must be a mapping, got {value!r}")
    unknown = set(value) - {"date", "prices"}
    if unknown:
        raise ConfigError(f"unknown schema keys {sorted(unknown)}; allowed: ['date', 'prices']")
    return value


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge config-file values and command-line flags; flags win."""
    raw = _load_yaml(args.config) if getattr(args, "config", None) else {}
    allowed = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}; allowed: {sorted(allowed)}")

    merged = dict(raw)
    merged["marginal"] = _parse_marginal(raw.get("marginal"))
    merged["schema"] = _parse_schema(raw.get("schema"))
    for name in allowed:
        flag = getattr(args, name, None)
        if flag is not None and flag is not False:
            merged[name] = flag
    if merged.get("out") is None or "out" not in merged:
        env = os.environ.get(OUTPUT_DIR_ENV)
        merged["out"] = env if env else RunConfig.out

    try:
        config = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc
    if config.data is not None and not config.data.is_file():
        raise ConfigError(f"data file not found: {config.data}")
    return config


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _thread_count(config: RunConfig) -> int:
    return config.threads if config.threads > 0 else (os.cpu_count() or 1)


def _parallel(fn, items, config: RunConfig) -> list:
    """Order-preserving map, threaded across independent work items."""
    items = list(items)
    workers = min(_thread_count(config), len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class _OutputDir:
    """Collects written artifacts and finishes with a checksum manifest."""

    def __init__(self, command: str, config: RunConfig):
        self.command = command
        self.config = config
        self.path = config.out
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def write_frame(self, frame: pd.DataFrame, name: str, **to_csv_kwargs) -> None:
        frame.to_csv(self.path / name, **{"index": False, **to_csv_kwargs})
        self.files.append(name)
        print(f"wrote {self.path / name} ({len(frame)} rows)")

    def register(self, name: str) -> None:
        if name not in self.files:
            self.files.append(name)

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "config": self.config.to_record(),
            "seed": self.config.seed,
            "files": {name: _sha256(self.path / name) for name in sorted(self.files)},
        }
        with open(self.path / "manifest.json", "w") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
            handle.write("\n")
        print(f"wrote {self.path / 'manifest.json'} ({len(self.files)} artifacts)")


def _load_returns(config: RunConfig):
    if config.data is None:
        raise ConfigError("no data file configured; pass --data or set 'data' in the config file")
    try:
        prices = load_prices(config.data, config.schema)
        return to_log_returns(prices)
    except DataError as exc:
        raise DataError(f"{config.data}: {exc}") from exc


def _resolve_assets(config: RunConfig, names: list[str]) -> tuple[str, tuple[str, ...]]:
    if config.target is None:
        raise ConfigError("no target asset configured; pass --target or set 'target'")
    if config.target not in names:
        raise ConfigError(f"target {config.target!r} not found in data columns {names}")
    conditioning = config.conditioning or tuple(n for n in names if n != config.target)
    missing = [c for c in conditioning if c not in names]
    if missing:
        raise ConfigError(f"conditioning assets {missing} not found in data columns {names}")
    if not conditioning:
        raise ConfigError("conditioning set is empty; the data holds no other assets")
    return config.target, tuple(conditioning)


def _fit_marginal(values: np.ndarray, config: RunConfig):
    if config.marginal is None:
        return select_model(values)
    return fit(values, config.marginal)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_describe(config: RunConfig) -> None:
    """Summary statistics and the rank-correlation matrix of the return panel."""
    series = _load_returns(config)
    print(f"describe: {len(series)} series, {series[0].n_obs} daily returns")
    out = _OutputDir("describe", config)
    stats = pd.DataFrame([describe(s) for s in series])
    out.write_frame(stats, "statistics.csv")
    out.write_frame(kendall_matrix(series), "kendall.csv", index=True, index_label="asset")
    out.finish()


def cmd_measure(config: RunConfig) -> None:
    """In-sample pipeline: marginals, copulas per family, all measures, rates."""
    series = {s.asset: s for s in _load_returns(config)}
    target, conditioning = _resolve_assets(config, list(series))
    families = config.families(ROLLING_FAMILIES)
    dates = series[target].dates
    lv = config.levels
    print(f"measure: target={target} conditioning={','.join(conditioning)} families={','.join(families)}")

    ret_map = {name: series[name].values for name in (target, *conditioning)}
    sys_name = system_label(conditioning)
    ret_map[sys_name] = np.sum([ret_map[c] for c in conditioning], axis=0)

    marginals = {name: _fit_marginal(series[name].values, config) for name in (target, *conditioning)}
    marginals[sys_name] = fit(ret_map[sys_name], SYSTEM_SERIES_SPEC)
    pseudo = {name: pit(m.z, m.innovation) for name, m in marginals.items()}

    var_series = [RiskSeries("VaR", target, (), ProbLevels(lv.beta, lv.beta), var_path(marginals[target], lv.beta), dates)]
    for name in (*conditioning, sys_name):
        var_series.append(
            RiskSeries("VaR", name, (), ProbLevels(lv.alpha, lv.alpha), var_path(marginals[name], lv.alpha), dates)
        )

    def run_family(family: str):
        measures = []
        for cond in conditioning:
            cop = fit_ml(np.column_stack([pseudo[target], pseudo[cond]]), family).copula
            measures.append(risk_series("CoVaR", cop, marginals[target], lv, target=target, conditioning=(cond,), dates=dates))
        cop = fit_ml(np.column_stack([pseudo[target], pseudo[sys_name]]), family).copula
        measures.append(risk_series("SCoVaR", cop, marginals[target], lv, target=target, conditioning=conditioning, dates=dates))
        joint = fit_ml(np.column_stack([pseudo[name] for name in (target, *conditioning)]), family).copula
        for measure in ("MCoVaR", "VCoVaR"):
            measures.append(risk_series(measure, joint, marginals[target], lv, target=target, conditioning=conditioning, dates=dates))
        reports = [
            report if report.measure == "VaR" else replace(report, copula_family=family)
            for report in insample_rates(ret_map, measures, var_series)
        ]
        return family, measures, reports

    results = _parallel(run_family, families, config)

    out = _OutputDir("measure", config)
    out.write_frame(pd.concat([s.to_frame() for s in var_series], ignore_index=True), "var_series.csv")
    report_rows = [r.to_record() for r in results[0][2] if r.measure == "VaR"]
    for family, measures, reports in results:
        out.write_frame(pd.concat([s.to_frame() for s in measures], ignore_index=True), f"measures_{family}.csv")
        report_rows.extend(r.to_record() for r in reports if r.measure != "VaR")
    out.write_frame(pd.DataFrame(report_rows), "violations.csv")
    out.finish()


def cmd_simulate(config: RunConfig) -> None:
    """Sample-refit-solve violation study over the measure/family/tau grid."""
    families = config.families(_SIMULATE_DEFAULT_FAMILIES)
    cells = [
        (measure, family, tau)
        for measure in _SIMULATE_MEASURES
        for family in families
        for tau in config.taus
    ]
    print(f"simulate: {len(cells)} cells, n={config.sample_size}, reps={config.reps}")

    def run_cell(indexed):
        index, (measure, family, tau) = indexed
        rate = validate_violation_rate(
            ValidationConfig(
                measure,
                family,
                tau,
                levels=config.levels,
                sample_size=config.sample_size,
                reps=config.reps,
                seed=config.seed + index,
            )
        )
        print(f"simulate: {measure}/{family} tau={tau} rate={rate:.4f}")
        return {
            "measure": measure,
            "family": family,
            "tau": tau,
            "alpha": config.alpha,
            "beta": config.beta,
            "sample_size": config.sample_size,
            "reps": config.reps,
            "rate": rate,
        }

    rows = _parallel(run_cell, enumerate(cells), config)
    out = _OutputDir("simulate", config)
    out.write_frame(pd.DataFrame(rows), "validation.csv")
    out.finish()


def cmd_curves(config: RunConfig) -> None:
    """Dependence curves per measure/family plus nested-copula surfaces."""
    curve_jobs = [(measure, family) for measure, fams in _CURVE_SPECS for family in fams]
    surface_jobs = [(measure, family) for measure in _SURFACE_MEASURES for family in _SIMULATE_DEFAULT_FAMILIES]
    print(f"curves: {len(curve_jobs)} curves, {len(surface_jobs)} surfaces")

    def run_curve(job):
        measure, family = job
        return dependence_curve(SweepConfig(measure, family, levels=config.levels))

    def run_surface(job):
        measure, family = job
        return hac_surface(measure, family, family, _SURFACE_GRID, _SURFACE_GRID, config.levels)

    curves = _parallel(run_curve, curve_jobs, config)
    surfaces = _parallel(run_surface, surface_jobs, config)

    out = _OutputDir("curves", config)
    for (measure, family), frame in zip(curve_jobs, curves):
        out.write_frame(frame, f"curve_{measure.lower()}_{family}.csv")
    for (measure, family), frame in zip(surface_jobs, surfaces):
        out.write_frame(frame, f"surface_{measure.lower()}_{family}.csv")
    out.finish()


def cmd_backtest(config: RunConfig) -> None:
    """Rolling one-day-ahead forecasts and out-of-sample violation rates."""
    series = {s.asset: s for s in _load_returns(config)}
    target, conditioning = _resolve_assets(config, list(series))
    families = config.families(ROLLING_FAMILIES)
    dates = series[target].dates
    ret_map = {name: series[name].values for name in series}
    print(
        f"backtest: target={target} conditioning={','.join(conditioning)} "
        f"window={config.window} stride={config.stride} families={','.join(families)}"
    )

    out = _OutputDir("backtest", config)
    pending = []
    for family in families:
        name = f"forecasts_{family}.csv"
        if config.resume and (out.path / name).is_file():
            print(f"backtest: {name} already present, skipping {family}")
            out.register(name)
        else:
            pending.append(family)

    def run_family(family: str):
        rcfg = RollingConfig(
            window=config.window, levels=config.levels, family=family, refit_stride=config.stride
        )
        return rolling_forecast(ret_map, target, conditioning, rcfg, dates=dates)

    results = _parallel(run_family, pending, config)

    # every rolling report row is tagged with its family, so a resumed run can
    # keep the skipped families' rows from the previous violations file
    report_frames = {}
    old_path = out.path / "oos_violations.csv"
    if config.resume and old_path.is_file():
        old = pd.read_csv(old_path)
        for family in families:
            if family not in pending:
                report_frames[family] = old[old["copula"] == family]
    for family, (forecasts, reports) in zip(pending, results):
        out.write_frame(pd.concat([s.to_frame() for s in forecasts], ignore_index=True), f"forecasts_{family}.csv")
        report_frames[family] = pd.DataFrame([r.to_record() for r in reports])
    kept = [report_frames[f] for f in families if f in report_frames]
    if kept:
        out.write_frame(pd.concat(kept, ignore_index=True), "oos_violations.csv")
    out.finish()


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_HANDLERS = {
    "describe": cmd_describe,
    "measure": cmd_measure,
    "simulate": cmd_simulate,
    "curves": cmd_curves,
    "backtest": cmd_backtest,
}


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML run configuration; flags override its values")
    parser.add_argument("--data", type=Path, help="delimited price file with a header row")
    parser.add_argument("--target", help="asset whose conditional tail is measured")
    parser.add_argument(
        "--conditioning", action="append", metavar="ASSET", help="conditioning asset (repeatable); default: all others"
    )
    parser.add_argument("--alpha", type=float, help="tail level of the conditioning events (default 0.05)")
    parser.add_argument("--beta", type=float, help="tail level of the conditional quantile (default 0.05)")
    parser.add_argument(
        "--copula", action="append", dest="copulas", metavar="FAMILY",
        help=f"copula family (repeatable); choose from {', '.join(ROLLING_FAMILIES)}",
    )
    parser.add_argument("--window", type=int, help="moving estimation window length (default 500)")
    parser.add_argument("--seed", type=int, help="base seed for simulation commands (default 0)")
    parser.add_argument("--threads", type=int, help="worker threads; 0 means all cores (default 0)")
    parser.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_DIR_ENV} or ./vcovar_out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vcovar",
        description="Copula-based conditional tail-risk pipeline: estimate, validate, and backtest.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    descriptions = {
        "describe": "summary statistics and rank correlations of a return panel",
        "measure": "in-sample VaR and conditional measures for every configured copula family",
        "simulate": "violation-rate validation table on simulated dependence scenarios",
        "curves": "dependence curves and nested-copula surfaces with limit references",
        "backtest": "rolling out-of-sample forecasts and violation reports",
    }
    parsers = {}
    for name, text in descriptions.items():
        parsers[name] = sub.add_parser(name, help=text, description=text)
        _add_common_flags(parsers[name])
    parsers["simulate"].add_argument("--reps", type=int, help="replications per grid cell (default 100)")
    parsers["simulate"].add_argument("--sample-size", dest="sample_size", type=int, help="draws per replication (default 10000)")
    parsers["simulate"].add_argument("--tau", action="append", dest="taus", type=float, help="rank-correlation level (repeatable)")
    parsers["backtest"].add_argument("--stride", type=int, help="windows between refits (default 1)")
    parsers["backtest"].add_argument("--resume", action="store_true", default=None, help="skip families whose forecast file already exists")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        _HANDLERS[args.command](config)
    except tuple(err for err, _, _ in _EXIT_CODES) as exc:
        for err, code, stage in _EXIT_CODES:
            if isinstance(exc, err):
                print(f"error [{stage}]: {exc}", file=sys.stderr)
                return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
