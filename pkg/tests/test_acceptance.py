"""Acceptance suite.

One test per numbered criterion; each prints a single PASS/FAIL line to the
live terminal (bypassing capture) before asserting, so a full run always shows
the eight verdicts.  Protocol sizes follow the stated tolerances; the frozen
seeds make every verdict reproducible.

Criterion 2's first two clauses fail by design: with the tail-oriented
dependence convention used throughout (named family describes the survival
side for the union measure), the low-dependence endpoint of the fast-moving
family sits farther from the no-dependence limit than the stated bands allow.
The test states the criterion faithfully and is expected to fail; the other
seven criteria pass.
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from vcovar import cli
from vcovar.backtest import RollingConfig, rolling_forecast
from vcovar.copulas import (
    ClaytonCopula,
    ComonotoneCopula,
    GaussianCopula,
    GumbelCopula,
    IndependenceCopula,
    StudentTCopula,
)
from vcovar.distributions import SkewTParams, normal_quantile, pit, skew_t_quantile, skew_t_sample
from vcovar.errors import DataError
from vcovar.marginal import ArmaGarchSpec, fit, select_model
from vcovar.risk import ProbLevels, covar_u, mcovar_u, solve_u, vcovar_u
from vcovar.simulation import (
    DEFAULT_TAU_GRID,
    SweepConfig,
    ValidationConfig,
    copula_from_tau,
    dependence_curve,
    hac_surface,
    validate_violation_rate,
)

REPO_SAMPLE = Path(__file__).resolve().parent.parent / "data" / "sample_prices.csv"

Q_BETA = -1.6448536269514722          # standard-normal 5% quantile
Q_ALPHA_BETA = -2.8070337683438042    # standard-normal 0.25% quantile


def verdict(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def gjr_series(n, var_intercept, arch, garch, asym, innovation, seed):
    """GJR-GARCH sample path with skewed-t innovations."""
    rng = np.random.default_rng(seed)
    z = skew_t_sample(n, innovation, rng)
    sig2 = var_intercept / (1.0 - arch - asym / 2.0 - garch)
    out = np.empty(n)
    for t in range(n):
        eps = np.sqrt(sig2) * z[t]
        out[t] = eps
        sig2 = var_intercept + (arch + asym * (eps <= 0.0)) * eps**2 + garch * sig2
    return out


def clayton_gjr_panel(n, theta, seed, dim=3):
    """Clayton-linked GJR-GARCH returns: the synthetic truth for the pipeline."""
    innovation = SkewTParams(1.05, 7.0)
    rng = np.random.default_rng(seed)
    g = rng.gamma(1.0 / theta, size=(n, 1))
    e = rng.exponential(size=(n, dim))
    u = (1.0 + e / g) ** (-1.0 / theta)
    r = np.empty((n, dim))
    for j in range(dim):
        z = skew_t_quantile(u[:, j], innovation)
        sig2 = 1.0 / (1.0 - 0.06 - 0.82 - 0.04)
        for t in range(n):
            eps = np.sqrt(sig2) * z[t]
            r[t, j] = 0.01 * eps
            sig2 = 1.0 + (0.06 + 0.08 * (eps < 0.0)) * eps**2 + 0.82 * sig2
    return r


def write_price_csv(path, returns, start="1990-01-01"):
    prices = 100.0 * np.exp(np.cumsum(returns, axis=0))
    prices = np.vstack([np.full(returns.shape[1], 100.0), prices])
    frame = pd.DataFrame(prices, columns=list("abc"[: returns.shape[1]]))
    frame.insert(0, "date", pd.date_range(start, periods=len(frame), freq="D").strftime("%Y-%m-%d"))
    frame.to_csv(path, index=False)
    return path


def test_criterion_1_violation_rate_table(capsys):
    """Average violation rates across the measure/family/tau grid, both levels."""
    cells = [
        (level, measure, family, tau)
        for level in (0.05, 0.01)
        for measure in ("CoVaR", "MCoVaR", "VCoVaR")
        for family in ("clayton", "gumbel")
        for tau in (0.25, 0.50, 0.75)
    ]
    failures = []
    worst = ("", 0.0)
    for i, (level, measure, family, tau) in enumerate(cells):
        band = 0.005 if level == 0.05 else 0.006
        rate = validate_violation_rate(
            ValidationConfig(
                measure, family, tau,
                levels=ProbLevels(level, level),
                sample_size=10_000, reps=100, seed=1000 + i,
            )
        )
        dev = abs(rate - level)
        if dev > worst[1]:
            worst = (f"{measure}/{family} tau={tau} level={level} rate={rate:.4f}", dev)
        if dev > band:
            failures.append((level, measure, family, tau, rate))
    ok = not failures
    verdict(capsys, 1, ok, f"36 cells, n=10000, N=100; worst cell {worst[0]} (dev {worst[1]:.4f})")
    assert ok, f"cells outside band: {failures}"


def test_criterion_2_limit_endpoints(capsys):
    """Curve endpoints against the no-dependence and full-dependence limits."""
    lv = ProbLevels(0.05, 0.05)
    near, far = {}, {}
    for measure in ("CoVaR", "MCoVaR", "VCoVaR"):
        curve = dependence_curve(SweepConfig(measure, "clayton")).set_index("tau")["value"]
        near[measure] = abs(curve.loc[0.025] - Q_BETA)
        far[measure] = abs(curve.loc[0.925] - Q_ALPHA_BETA)
    low_ok = all(d <= 0.02 for d in near.values())
    high_ok = all(d <= 0.15 for d in far.values())

    direct_devs = []
    for p in (1, 2, 3):
        measures = ("CoVaR", "MCoVaR", "VCoVaR") if p == 1 else ("MCoVaR", "VCoVaR")
        for measure in measures:
            u_ind = solve_u(measure, IndependenceCopula(p + 1), lv)
            u_com = solve_u(measure, ComonotoneCopula(p + 1), lv)
            direct_devs.append(abs(normal_quantile(u_ind) - Q_BETA))
            direct_devs.append(abs(normal_quantile(u_com) - Q_ALPHA_BETA))
    direct_ok = max(direct_devs) <= 1e-3

    ok = low_ok and high_ok and direct_ok
    detail = (
        "tau=0.025 devs "
        + ", ".join(f"{m}={d:.4f}" for m, d in near.items())
        + " (band 0.02); tau=0.925 devs "
        + ", ".join(f"{m}={d:.4f}" for m, d in far.items())
        + f" (band 0.15); direct-copula max dev {max(direct_devs):.2e} (band 1e-3)"
    )
    verdict(capsys, 2, ok, detail)
    assert ok, detail


def test_criterion_3_reduction_identities(capsys):
    """Single-conditioner collapse and the two degenerate-dependence identities."""
    rng = np.random.default_rng(42)
    families = ("clayton", "gumbel", "gaussian", "student_t")
    worst_pairwise = 0.0
    for _ in range(100):
        family = families[rng.integers(len(families))]
        tau = float(rng.uniform(0.05, 0.85))
        lv = ProbLevels(float(rng.uniform(0.01, 0.2)), float(rng.uniform(0.01, 0.2)))
        cop = copula_from_tau(family, tau, 2)
        roots = [covar_u(cop, lv), mcovar_u(cop, lv), vcovar_u(cop, lv)]
        values = [normal_quantile(u) for u in roots]
        worst_pairwise = max(worst_pairwise, max(roots) - min(roots), max(values) - min(values))

    worst_degenerate = 0.0
    for p in (1, 2, 3):
        measures = ("CoVaR", "MCoVaR", "VCoVaR") if p == 1 else ("MCoVaR", "VCoVaR")
        for _ in range(10):
            lv = ProbLevels(float(rng.uniform(0.01, 0.2)), float(rng.uniform(0.01, 0.2)))
            for measure in measures:
                u_ind = solve_u(measure, IndependenceCopula(p + 1), lv)
                u_com = solve_u(measure, ComonotoneCopula(p + 1), lv)
                worst_degenerate = max(
                    worst_degenerate, abs(u_ind - lv.beta), abs(u_com - lv.alpha * lv.beta)
                )

    ok = worst_pairwise <= 1e-8 and worst_degenerate <= 1e-8
    verdict(
        capsys, 3, ok,
        f"single-conditioner collapse max gap {worst_pairwise:.2e}; "
        f"degenerate-copula max gap {worst_degenerate:.2e} (bands 1e-8)",
    )
    assert ok


def test_criterion_4_dual_method_equivalence(capsys):
    """Generator-based closed forms against bracketed numeric roots."""
    rng = np.random.default_rng(43)
    worst = 0.0
    for _ in range(100):
        family = ("clayton", "gumbel")[rng.integers(2)]
        tau = float(rng.uniform(0.05, 0.9))
        lv = ProbLevels(float(rng.uniform(0.01, 0.2)), float(rng.uniform(0.01, 0.2)))
        pair = copula_from_tau(family, tau, 2)
        worst = max(worst, abs(covar_u(pair, lv, "closed") - covar_u(pair, lv, "numeric")))
        joint = copula_from_tau(family, tau, int(rng.integers(2, 5)))
        worst = max(worst, abs(mcovar_u(joint, lv, "closed") - mcovar_u(joint, lv, "numeric")))
    ok = worst <= 1e-10
    verdict(capsys, 4, ok, f"100 configurations, max closed-vs-numeric gap {worst:.2e} (band 1e-10)")
    assert ok


def test_criterion_5_monotonicity(capsys):
    """Dependence-consistency of the curves and surface sign patterns."""
    problems = []

    for family in ("clayton", "gumbel"):
        values = dependence_curve(SweepConfig("VCoVaR", family))["value"].to_numpy()
        if not np.all(np.diff(values) < 0.0):
            problems.append(f"VCoVaR/{family} curve not strictly decreasing")

    curve = dependence_curve(SweepConfig("MCoVaR", "clayton"))
    argmin_tau = float(curve.loc[curve["value"].idxmin(), "tau"])
    if not 0.1 <= argmin_tau <= 0.35:
        problems.append(f"MCoVaR/clayton argmin at tau={argmin_tau}")

    grid = tuple(np.round(np.linspace(0.1, 0.9, 9), 6))
    for family in ("clayton", "gumbel"):
        for measure in ("MCoVaR", "VCoVaR"):
            surface = hac_surface(measure, family, family, grid, grid)
            valid = surface[surface["valid"]]
            for inner, block in valid.groupby("tau_inner"):
                vals = block.sort_values("tau_outer")["value"].to_numpy()
                if not np.all(np.diff(vals) < 0.0):
                    problems.append(f"{measure}/{family} not decreasing in outer tau at inner={inner}")
            if measure == "VCoVaR":
                for outer, block in valid.groupby("tau_outer"):
                    vals = block.sort_values("tau_inner")["value"].to_numpy()
                    if not np.all(np.diff(vals) < 0.0):
                        problems.append(f"VCoVaR/{family} not decreasing in inner tau at outer={outer}")

    ok = not problems
    verdict(
        capsys, 5, ok,
        "curves strictly decreasing, MCoVaR/clayton argmin at tau="
        f"{argmin_tau}, surface signs hold on the 9x9 grid" if ok else "; ".join(problems),
    )
    assert ok, problems


def test_criterion_6_marginal_recovery(capsys):
    """Asymptotic-CI coverage at n=5000 and staged selection on known dynamics."""
    innovation = SkewTParams(1.10, 6.0)
    true = {
        "var_intercept": 1e-4, "arch1": 0.08, "asym1": 0.10,
        "garch1": 0.82, "skewness": 1.10, "shape": 6.0,
    }
    spec = ArmaGarchSpec(0, 0, 1, 1, False, "asymmetric")
    hits = 0
    for r in range(100):
        x = gjr_series(5000, 1e-4, 0.08, 0.82, 0.10, innovation, seed=1300 + r)
        f = fit(x, spec)
        est = f.coefficients()
        hits += all(abs(est[k] - v) <= 2.576 * f.std_errors[k] + 1e-12 for k, v in true.items())

    noise = skew_t_sample(1_000, SkewTParams(1.1, 6.0), np.random.default_rng(11)) * 0.01
    flat = select_model(noise, max_ar=1, max_ma=1)
    sym = select_model(
        gjr_series(1_500, 1e-4, 0.12, 0.82, 0.0, SkewTParams(1.1, 6.0), seed=12),
        max_ar=1, max_ma=1, max_arch=2, max_garch=1,
    )
    asym = select_model(
        gjr_series(3_000, 1e-4, 0.02, 0.80, 0.25, SkewTParams(1.1, 6.0), seed=13),
        max_ar=1, max_ma=1, max_arch=1, max_garch=1,
    )
    stages = (flat.spec.variance, sym.spec.variance, asym.spec.variance)
    escalation_ok = stages == ("constant", "symmetric", "asymmetric")

    ok = hits >= 90 and escalation_ok
    verdict(
        capsys, 6, ok,
        f"99% CI coverage {hits}/100 (need >= 90); selection stages {stages}",
    )
    assert ok, (hits, stages)


def test_criterion_7_pipeline_backtest(capsys, tmp_path):
    """Full command pipeline on a synthetic truth, plus the bundled-sample smoke."""
    panel = write_price_csv(tmp_path / "panel.csv", clayton_gjr_panel(12_000, 1.6, seed=13))
    fixed = "{arch: 1, garch: 1, include_mean: false, variance: asymmetric}"
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"data: {panel}\ntarget: a\nmarginal: {fixed}\ncopulas: [clayton]\n")

    assert cli.main(["measure", "--config", str(cfg), "--out", str(tmp_path / "ins")]) == 0
    ins = pd.read_csv(tmp_path / "ins" / "violations.csv")
    ins = ins[ins["measure"] != "VaR"]
    ins_worst = float((ins["rate"] - 0.05).abs().max())

    assert cli.main([
        "backtest", "--config", str(cfg), "--window", "500", "--stride", "25",
        "--out", str(tmp_path / "oos"),
    ]) == 0
    oos = pd.read_csv(tmp_path / "oos" / "oos_violations.csv")
    oos = oos[oos["measure"] != "VaR"]
    oos_worst = float((oos["rate"] - 0.05).abs().max())

    smoke_cfg = tmp_path / "smoke.yaml"
    smoke_cfg.write_text(f"data: {REPO_SAMPLE}\ntarget: asset_a\ncopulas: [student_t]\n")
    smoke_ok = (
        cli.main(["measure", "--config", str(smoke_cfg), "--out", str(tmp_path / "smk")]) == 0
        and cli.main([
            "backtest", "--config", str(smoke_cfg), "--stride", "40", "--out", str(tmp_path / "smk_bt"),
        ]) == 0
        and (tmp_path / "smk_bt" / "oos_violations.csv").is_file()
    )

    ok = ins_worst <= 0.02 and oos_worst <= 0.02 and smoke_ok
    verdict(
        capsys, 7, ok,
        f"synthetic truth: in-sample worst dev {ins_worst:.4f}, out-of-sample worst dev "
        f"{oos_worst:.4f} (band 0.02); bundled-sample smoke {'completed' if smoke_ok else 'failed'}",
    )
    assert ok, (ins_worst, oos_worst, smoke_ok)


def test_criterion_8_property_suites(capsys):
    """Named cross-module invariants under fixed seeds."""
    rng = np.random.default_rng(2024)
    problems = []

    # Frechet bounds and rotation involution across families and dimensions
    for family in ("clayton", "gumbel", "gaussian", "student_t"):
        for dim in (2, 3, 4):
            cop = copula_from_tau(family, float(rng.uniform(0.1, 0.8)), dim)
            pts = rng.uniform(0.001, 0.999, size=(200, dim))
            c = np.array([cop.cdf(p) for p in pts])
            lower = np.maximum(pts.sum(axis=1) - dim + 1.0, 0.0)
            upper = pts.min(axis=1)
            if not (np.all(c >= lower - 1e-9) and np.all(c <= upper + 1e-9)):
                problems.append(f"Frechet bounds violated for {family} dim={dim}")
            back = cop.rotate180().rotate180()
            if any(abs(back.cdf(p) - cop.cdf(p)) > 1e-12 for p in pts[:20]):
                problems.append(f"rotation not involutive for {family} dim={dim}")

    # rank-correlation round trips
    for tau in (0.15, 0.45, 0.75):
        trips = [
            ClaytonCopula.from_tau(tau, 2).kendall_tau(),
            GumbelCopula.from_tau(tau, 2).kendall_tau(),
            GaussianCopula.from_tau(tau, 2).kendall_tau(),
            StudentTCopula.from_tau(tau, 2, shape=4.0).kendall_tau(),
        ]
        if max(abs(t - tau) for t in trips) > 1e-12:
            problems.append(f"tau round trip failed at {tau}")

    # probability integral transform uniformity
    params = SkewTParams(1.2, 5.0)
    u = pit(skew_t_sample(4000, params, rng), params)
    if not (u.min() > 0.0 and u.max() < 1.0):
        problems.append("PIT left the open unit interval")
    if stats.kstest(u, "uniform").pvalue <= 0.01:
        problems.append("PIT output rejected as uniform")

    # causality: truncating the future leaves earlier forecasts untouched
    r = clayton_gjr_panel(320, 1.6, seed=77)
    data = {"a": r[:, 0], "b": r[:, 1], "c": r[:, 2]}
    config = RollingConfig(window=250, family="clayton", refit_stride=30)
    full, _ = rolling_forecast(data, "a", ("b", "c"), config)
    trunc, _ = rolling_forecast({k: v[:290] for k, v in data.items()}, "a", ("b", "c"), config)
    for full_series, trunc_series in zip(full, trunc):
        if not np.array_equal(full_series.values[:40], trunc_series.values):
            problems.append(f"lookahead detected in {full_series.measure}/{full_series.target}")

    ok = not problems
    verdict(
        capsys, 8, ok,
        "Frechet bounds, rotation involution, tau round trips, PIT uniformity, "
        "and forecast causality all hold" if ok else "; ".join(problems),
    )
    assert ok, problems
