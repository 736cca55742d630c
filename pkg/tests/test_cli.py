"""End-to-end tests of the command-line pipeline driver."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from vcovar import cli
from vcovar.errors import ConfigError, FitError, SolverError
from vcovar.marginal import ArmaGarchSpec

REPO_SAMPLE = Path(__file__).resolve().parent.parent / "data" / "sample_prices.csv"

FIXED_MARGINAL = "{arch: 1, garch: 1, include_mean: false, variance: asymmetric}"


def write_panel(path, n_prices=421, theta=1.6, seed=3, dim=3):
    """Clayton-linked GJR-GARCH price panel for pipeline smoke runs."""
    rng = np.random.default_rng(seed)
    m = n_prices - 1
    g = rng.gamma(1.0 / theta, size=(m, 1))
    e = rng.exponential(size=(m, dim))
    z = stats.norm.ppf((1.0 + e / g) ** (-1.0 / theta))
    r = np.empty((m, dim))
    for j in range(dim):
        sig2 = 1.0 / (1.0 - 0.08 - 0.85 - 0.03)
        for t in range(m):
            eps = np.sqrt(sig2) * z[t, j]
            r[t, j] = 0.012 * eps
            sig2 = 1.0 + (0.08 + 0.06 * (eps < 0.0)) * eps**2 + 0.85 * sig2
    prices = 100.0 * np.exp(np.cumsum(r, axis=0))
    prices = np.vstack([np.full(dim, 100.0), prices])
    frame = pd.DataFrame(prices, columns=[f"asset_{c}" for c in "abc"[:dim]])
    frame.insert(0, "date", pd.date_range("2020-01-01", periods=n_prices, freq="D").strftime("%Y-%m-%d"))
    frame.to_csv(path, index=False)
    return path


def hash_dir(path):
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(Path(path).iterdir())
    }


def run_cli(args):
    return cli.main([str(a) for a in args])


class TestConfigResolution:
    def parse(self, argv):
        return cli.build_parser().parse_args([str(a) for a in argv])

    def test_flags_override_config_file(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("alpha: 0.05\nseed: 3\ntarget: asset_a\n")
        args = self.parse(["measure", "--config", cfg, "--alpha", "0.01"])
        config = cli.resolve_config(args)
        assert config.alpha == 0.01
        assert config.seed == 3
        assert config.target == "asset_a"

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("alhpa: 0.05\n")
        with pytest.raises(ConfigError, match="unknown config keys"):
            cli.resolve_config(self.parse(["measure", "--config", cfg]))

    def test_marginal_mapping_parsed(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(f"marginal: {FIXED_MARGINAL}\n")
        config = cli.resolve_config(self.parse(["measure", "--config", cfg]))
        assert config.marginal == ArmaGarchSpec(arch=1, garch=1, include_mean=False, variance="asymmetric")

    def test_marginal_auto_is_default(self):
        config = cli.resolve_config(self.parse(["measure"]))
        assert config.marginal is None
        assert config.to_record()["marginal"] == "auto"

    def test_bad_marginal_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("marginal: {archh: 1}\n")
        with pytest.raises(ConfigError, match="unknown marginal keys"):
            cli.resolve_config(self.parse(["measure", "--config", cfg]))

    def test_env_var_sets_default_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
        config = cli.resolve_config(self.parse(["curves"]))
        assert config.out == tmp_path / "from_env"

    def test_out_flag_beats_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
        config = cli.resolve_config(self.parse(["curves", "--out", tmp_path / "flag"]))
        assert config.out == tmp_path / "flag"

    def test_target_in_conditioning_rejected(self):
        args = self.parse(["measure", "--target", "a", "--conditioning", "a", "--conditioning", "b"])
        with pytest.raises(ConfigError, match="must not appear"):
            cli.resolve_config(args)

    def test_unknown_copula_rejected(self):
        with pytest.raises(ConfigError, match="unsupported copula"):
            cli.resolve_config(self.parse(["measure", "--copula", "frank"]))

    def test_missing_data_file_rejected(self):
        with pytest.raises(ConfigError, match="not found"):
            cli.resolve_config(self.parse(["measure", "--data", "no_such_file.csv"]))

    def test_levels_validated(self):
        with pytest.raises(ConfigError, match="alpha and beta"):
            cli.resolve_config(self.parse(["measure", "--alpha", "1.2"]))

    def test_help_prints_usage(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["--help"])
        assert excinfo.value.code == 0
        assert "usage: vcovar" in capsys.readouterr().out


class TestDescribe:
    def test_bundled_sample(self, tmp_path):
        out = tmp_path / "desc"
        assert run_cli(["describe", "--data", REPO_SAMPLE, "--out", out]) == 0
        stats_table = pd.read_csv(out / "statistics.csv")
        assert list(stats_table["asset"]) == ["asset_a", "asset_b", "asset_c"]
        assert set(stats_table.columns) >= {"n", "sd", "skewness", "kurtosis", "jarque_bera_p", "ljung_box_p"}
        kend = pd.read_csv(out / "kendall.csv", index_col="asset")
        np.testing.assert_array_equal(kend.values, kend.values.T)
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["files"]) == {"statistics.csv", "kendall.csv"}

    def test_empty_file_fails_with_data_code(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert run_cli(["describe", "--data", empty, "--out", tmp_path / "o"]) == 3
        assert "error [data]" in capsys.readouterr().err


@pytest.fixture(scope="module")
def panel_path(tmp_path_factory):
    return write_panel(tmp_path_factory.mktemp("panel") / "panel.csv")


@pytest.fixture(scope="module")
def measure_out(panel_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("measure")
    cfg = out / "run.yaml"
    cfg.write_text(
        f"data: {panel_path}\ntarget: asset_a\nmarginal: {FIXED_MARGINAL}\n"
        "copulas: [clayton, gaussian]\n"
        f"out: {out / 'artifacts'}\n"
    )
    assert cli.main(["measure", "--config", str(cfg)]) == 0
    return out / "artifacts"


class TestMeasure:
    def test_artifact_layout(self, measure_out):
        names = {p.name for p in measure_out.iterdir()}
        assert names == {
            "var_series.csv", "measures_clayton.csv", "measures_gaussian.csv",
            "violations.csv", "manifest.json",
        }
        manifest = json.loads((measure_out / "manifest.json").read_text())
        assert manifest["command"] == "measure"
        assert manifest["config"]["target"] == "asset_a"

    def test_measure_table_contents(self, measure_out):
        table = pd.read_csv(measure_out / "measures_clayton.csv")
        assert set(table["measure"]) == {"CoVaR", "SCoVaR", "MCoVaR", "VCoVaR"}
        assert (table["target"] == "asset_a").all()
        counts = table.groupby("measure").size()
        # two pairwise series plus one of each joint measure, 420 dates each
        assert counts["CoVaR"] == 840
        assert counts["MCoVaR"] == counts["VCoVaR"] == counts["SCoVaR"] == 420
        assert np.isfinite(table["value"]).all()
        assert (table["value"] < 0).all()

    def test_var_levels(self, measure_out):
        var = pd.read_csv(measure_out / "var_series.csv")
        assert set(var["target"]) == {"asset_a", "asset_b", "asset_c", "sum(asset_b+asset_c)"}
        assert (var["measure"] == "VaR").all()

    def test_violation_rates_sane(self, measure_out):
        rates = pd.read_csv(measure_out / "violations.csv")
        var_rows = rates[rates["measure"] == "VaR"]
        assert len(var_rows) == 4
        assert var_rows["copula"].isna().all()
        cond = rates[rates["measure"] != "VaR"]
        assert set(cond["copula"]) == {"clayton", "gaussian"}
        assert len(cond) == 2 * 5
        assert cond["rate"].between(0.0, 0.35).all()
        clayton = cond[cond["copula"] == "clayton"]
        counts = clayton.groupby("measure")["condition_count"]
        # union events nest above each pairwise event, joint events below
        assert counts.min()["VCoVaR"] >= counts.max()["CoVaR"]
        assert counts.min()["CoVaR"] >= counts.max()["MCoVaR"]

    def test_byte_identical_rerun(self, panel_path, measure_out):
        before = hash_dir(measure_out)
        args = [
            "measure", "--data", panel_path, "--target", "asset_a",
            "--copula", "clayton", "--copula", "gaussian", "--out", measure_out,
        ]
        cfg_text = f"marginal: {FIXED_MARGINAL}\n"
        cfg = measure_out.parent / "rerun.yaml"
        cfg.write_text(cfg_text)
        assert run_cli(args + ["--config", cfg]) == 0
        assert hash_dir(measure_out) == before

    def test_single_conditioning_measures_coincide(self, panel_path, tmp_path):
        out = tmp_path / "single"
        cfg = tmp_path / "single.yaml"
        cfg.write_text(f"marginal: {FIXED_MARGINAL}\n")
        assert run_cli([
            "measure", "--config", cfg, "--data", panel_path, "--target", "asset_a",
            "--conditioning", "asset_b", "--copula", "gumbel", "--out", out,
        ]) == 0
        table = pd.read_csv(out / "measures_gumbel.csv")
        pivot = table.pivot_table(index="date", columns="measure", values="value")
        np.testing.assert_allclose(pivot["CoVaR"], pivot["MCoVaR"], atol=1e-8)
        np.testing.assert_allclose(pivot["CoVaR"], pivot["VCoVaR"], atol=1e-8)

    def test_fit_failure_exit_code(self, panel_path, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise FitError("no optimum")

        monkeypatch.setattr(cli, "select_model", broken)
        code = run_cli(["measure", "--data", panel_path, "--target", "asset_a", "--out", tmp_path / "o"])
        assert code == 4


class TestSimulate:
    def test_grid_layout_and_reproducibility(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        args = [
            "simulate", "--reps", 2, "--sample-size", 1500, "--tau", 0.5,
            "--copula", "clayton", "--copula", "gumbel", "--seed", 9,
        ]
        assert run_cli(args + ["--out", out1]) == 0
        assert run_cli(args + ["--out", out2]) == 0
        table = pd.read_csv(out1 / "validation.csv")
        assert len(table) == 6
        assert set(table["measure"]) == {"CoVaR", "MCoVaR", "VCoVaR"}
        assert set(table["family"]) == {"clayton", "gumbel"}
        assert table["rate"].between(0.0, 0.25).all()
        assert (out1 / "validation.csv").read_bytes() == (out2 / "validation.csv").read_bytes()

    def test_seed_changes_rates(self, tmp_path):
        rates = []
        for seed in (1, 2):
            out = tmp_path / f"s{seed}"
            assert run_cli([
                "simulate", "--reps", 1, "--sample-size", 800, "--tau", 0.4,
                "--copula", "clayton", "--seed", seed, "--out", out,
            ]) == 0
            rates.append(tuple(pd.read_csv(out / "validation.csv")["rate"]))
        assert rates[0] != rates[1]

    def test_invalid_tau_is_config_error(self, tmp_path, capsys):
        assert run_cli(["simulate", "--tau", 1.5, "--out", tmp_path / "o"]) == 2
        assert "error [config]" in capsys.readouterr().err

    def test_solver_failure_exit_code(self, tmp_path, monkeypatch):
        def broken(config):
            raise SolverError("no bracket")

        monkeypatch.setattr(cli, "validate_violation_rate", broken)
        assert run_cli(["simulate", "--reps", 1, "--sample-size", 500, "--out", tmp_path / "o"]) == 5


@pytest.fixture(scope="module")
def curves_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("curves")
    assert cli.main(["curves", "--out", str(out)]) == 0
    return out


class TestCurves:
    def test_artifact_set(self, curves_out):
        names = {p.name for p in curves_out.iterdir()}
        expected = {f"curve_covar_{f}.csv" for f in ("clayton", "gumbel", "gaussian", "student_t")}
        expected |= {f"curve_{m}_{f}.csv" for m in ("mcovar", "vcovar") for f in ("clayton", "gumbel")}
        expected |= {f"surface_{m}_{f}.csv" for m in ("mcovar", "vcovar") for f in ("clayton", "gumbel")}
        assert names == expected | {"manifest.json"}

    def test_row_counts_match_grids(self, curves_out):
        assert len(pd.read_csv(curves_out / "curve_covar_clayton.csv")) == 37
        assert len(pd.read_csv(curves_out / "surface_vcovar_gumbel.csv")) == 17 * 17

    def test_limit_columns_constant(self, curves_out):
        for name in ("curve_covar_gaussian.csv", "curve_vcovar_clayton.csv"):
            table = pd.read_csv(curves_out / name)
            np.testing.assert_allclose(table["limit_independence"], stats.norm.ppf(0.05), atol=1e-9)
            np.testing.assert_allclose(table["limit_comonotone"], stats.norm.ppf(0.0025), atol=1e-9)

    def test_surface_diagonal_matches_curve(self, curves_out):
        curve = pd.read_csv(curves_out / "curve_mcovar_clayton.csv").set_index("tau")["value"]
        surface = pd.read_csv(curves_out / "surface_mcovar_clayton.csv")
        diag = surface[np.isclose(surface["tau_outer"], surface["tau_inner"])]
        assert len(diag) == 17
        for _, row in diag.iterrows():
            assert row["value"] == pytest.approx(curve.loc[row["tau_outer"]], abs=1e-8)


@pytest.fixture(scope="module")
def bt_panel(tmp_path_factory):
    return write_panel(tmp_path_factory.mktemp("btpanel") / "panel.csv", n_prices=331, seed=21)


class TestBacktest:
    def test_window_exceeding_data_fails(self, bt_panel, tmp_path, capsys):
        code = run_cli([
            "backtest", "--data", bt_panel, "--target", "asset_a",
            "--window", 500, "--out", tmp_path / "o",
        ])
        assert code == 3
        assert "error [data]" in capsys.readouterr().err

    def test_run_and_resume(self, bt_panel, tmp_path, capsys):
        out = tmp_path / "bt"
        base = [
            "backtest", "--data", bt_panel, "--target", "asset_a",
            "--window", 250, "--stride", 40, "--out", out,
        ]
        assert run_cli(base + ["--copula", "clayton"]) == 0
        first = hash_dir(out)
        forecasts = pd.read_csv(out / "forecasts_clayton.csv")
        assert set(forecasts["measure"]) == {"VaR", "CoVaR", "SCoVaR", "MCoVaR", "VCoVaR"}
        assert forecasts.groupby(["measure", "target", "conditioning"], dropna=False).size().eq(80).all()

        capsys.readouterr()
        assert run_cli(base + ["--copula", "clayton", "--copula", "gaussian", "--resume"]) == 0
        assert "skipping clayton" in capsys.readouterr().out
        assert hash_dir(out)["forecasts_clayton.csv"] == first["forecasts_clayton.csv"]
        rates = pd.read_csv(out / "oos_violations.csv")
        assert set(rates["copula"]) == {"clayton", "gaussian"}
        assert len(rates[rates["copula"] == "clayton"]) == 9

    def test_manifest_covers_all_artifacts(self, bt_panel, tmp_path):
        out = tmp_path / "bt2"
        assert run_cli([
            "backtest", "--data", bt_panel, "--target", "asset_a", "--window", 250,
            "--stride", 60, "--copula", "gumbel", "--out", out,
        ]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        listed = set(manifest["files"])
        present = {p.name for p in out.iterdir()} - {"manifest.json"}
        assert listed == present
        for name, digest in manifest["files"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
