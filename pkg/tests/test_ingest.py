"""Price-file ingestion, return transformation, and summary-statistic tests."""

import logging

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from vcovar.errors import DataError
from vcovar.ingest import (
    ReturnSeries,
    describe,
    kendall_matrix,
    load_prices,
    system_label,
    system_series,
    to_log_returns,
)


def write_csv(tmp_path, text, name="prices.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def make_series(values, asset="x", dates=None):
    values = np.asarray(values, dtype=float)
    if dates is None:
        dates = np.arange(values.shape[0])
    return ReturnSeries(asset, dates, values)


class TestLoadPrices:
    def test_three_row_example(self, tmp_path):
        path = write_csv(tmp_path, "date,acme\n2021-01-01,100\n2021-01-02,110\n2021-01-03,99\n")
        prices = load_prices(path)
        series = to_log_returns(prices)[0]
        np.testing.assert_allclose(series.values, [np.log(1.1), np.log(0.9)], atol=1e-12)
        assert series.values[0] == pytest.approx(0.0953, abs=5e-5)
        assert series.values[1] == pytest.approx(-0.1054, abs=5e-5)

    def test_duplicate_dates_error(self, tmp_path):
        path = write_csv(tmp_path, "date,a\n2021-01-01,1\n2021-01-01,2\n2021-01-03,3\n")
        with pytest.raises(DataError, match="duplicate"):
            load_prices(path)

    def test_zero_price_error(self, tmp_path):
        path = write_csv(tmp_path, "date,a\n2021-01-01,1\n2021-01-02,0\n2021-01-03,3\n")
        with pytest.raises(DataError, match="non-positive"):
            load_prices(path)

    def test_missing_rows_dropped_with_count(self, tmp_path, caplog):
        path = write_csv(
            tmp_path,
            "date,a,b\n2021-01-01,1,2\n2021-01-02,,2\n2021-01-03,3,\n2021-01-04,4,5\n",
        )
        with caplog.at_level(logging.WARNING, logger="vcovar.ingest"):
            prices = load_prices(path)
        assert len(prices) == 2
        assert any("dropped 2 rows" in msg for msg in caplog.messages)

    def test_no_complete_rows_error(self, tmp_path):
        path = write_csv(tmp_path, "date,a,b\n2021-01-01,1,\n2021-01-02,,2\n")
        with pytest.raises(DataError, match="complete"):
            load_prices(path)

    def test_rows_sorted_by_date(self, tmp_path):
        path = write_csv(tmp_path, "date,a\n2021-01-03,3\n2021-01-01,1\n2021-01-02,2\n")
        prices = load_prices(path)
        np.testing.assert_allclose(prices["a"].values, [1.0, 2.0, 3.0])

    def test_schema_renames_and_selects(self, tmp_path):
        path = write_csv(tmp_path, "day,btc_usd,junk\n2021-01-01,10,x\n2021-01-02,11,y\n")
        prices = load_prices(path, {"date": "day", "prices": {"BTC": "btc_usd"}})
        assert list(prices.columns) == ["BTC"]
        assert len(prices) == 2

    def test_missing_schema_column_error(self, tmp_path):
        path = write_csv(tmp_path, "date,a\n2021-01-01,1\n")
        with pytest.raises(DataError, match="missing columns"):
            load_prices(path, {"prices": {"zzz": "zzz"}})

    def test_missing_date_column_error(self, tmp_path):
        path = write_csv(tmp_path, "day,a\n2021-01-01,1\n")
        with pytest.raises(DataError, match="no 'date' column"):
            load_prices(path)

    def test_unparseable_dates_error(self, tmp_path):
        path = write_csv(tmp_path, "date,a\nnot-a-date,1\nalso-bad,2\n")
        with pytest.raises(DataError, match="unparseable dates"):
            load_prices(path)

    def test_missing_file_error(self, tmp_path):
        with pytest.raises(DataError, match="could not read"):
            load_prices(tmp_path / "nope.csv")

    def test_custom_delimiter(self, tmp_path):
        path = write_csv(tmp_path, "date;a\n2021-01-01;1\n2021-01-02;2\n")
        prices = load_prices(path, delimiter=";")
        assert list(prices.columns) == ["a"]

    def test_column_order_irrelevant(self, tmp_path):
        head = write_csv(tmp_path, "date,a,b\n2021-01-01,1,10\n2021-01-02,2,20\n2021-01-03,3,30\n", "p1.csv")
        swapped = write_csv(tmp_path, "date,b,a\n2021-01-01,10,1\n2021-01-02,20,2\n2021-01-03,30,3\n", "p2.csv")
        first = load_prices(head)
        second = load_prices(swapped)
        for col in ("a", "b"):
            np.testing.assert_array_equal(first[col].values, second[col].values)


class TestToLogReturns:
    def _frame(self, columns):
        n = len(next(iter(columns.values())))
        idx = pd.date_range("2021-01-01", periods=n, freq="D")
        return pd.DataFrame(columns, index=idx)

    def test_constant_prices_give_zero_returns(self):
        series = to_log_returns(self._frame({"a": [5.0] * 6}))[0]
        np.testing.assert_array_equal(series.values, np.zeros(5))

    def test_doubling_gives_log_two(self):
        series = to_log_returns(self._frame({"a": [1.0, 2.0, 4.0, 8.0]}))[0]
        np.testing.assert_allclose(series.values, np.log(2.0), atol=1e-15)

    def test_cumsum_round_trip(self):
        rng = np.random.default_rng(5)
        prices = 100.0 * np.exp(np.cumsum(0.01 * rng.standard_normal(50)))
        series = to_log_returns(self._frame({"a": prices}))[0]
        rebuilt = prices[0] * np.exp(np.cumsum(series.values))
        np.testing.assert_allclose(rebuilt, prices[1:], rtol=1e-12)

    def test_length_and_dates(self):
        frame = self._frame({"a": [1.0, 2.0, 3.0], "b": [3.0, 2.0, 1.0]})
        out = to_log_returns(frame)
        assert [s.asset for s in out] == ["a", "b"]
        assert all(s.n_obs == 2 for s in out)
        assert np.array_equal(out[0].dates, np.asarray(frame.index[1:]))

    def test_too_short_error(self):
        with pytest.raises(DataError, match="at least 3"):
            to_log_returns(self._frame({"a": [1.0, 2.0]}))

    def test_nonpositive_error(self):
        with pytest.raises(DataError, match="positive"):
            to_log_returns(self._frame({"a": [1.0, -1.0, 2.0]}))


class TestReturnSeries:
    def test_invariants(self):
        with pytest.raises(DataError, match="at least 2"):
            make_series([0.1])
        with pytest.raises(DataError, match="equal length"):
            ReturnSeries("x", np.arange(3), np.zeros(2))
        with pytest.raises(DataError, match="non-finite"):
            make_series([0.1, np.nan])
        with pytest.raises(DataError, match="strictly increasing"):
            make_series([0.1, 0.2], dates=np.array([2, 1]))


class TestSystemSeries:
    def test_exact_sum_and_label(self):
        rng = np.random.default_rng(7)
        a = make_series(rng.standard_normal(40), "a")
        b = make_series(rng.standard_normal(40), "b")
        sys = system_series([a, b])
        np.testing.assert_array_equal(sys.values, a.values + b.values)
        assert sys.label == "sum(a+b)" == system_label(("a", "b"))
        assert sys.components == ("a", "b")

    def test_alignment_checked(self):
        a = make_series(np.zeros(10), "a")
        b = make_series(np.zeros(11), "b")
        with pytest.raises(DataError, match="aligned"):
            system_series([a, b])
        with pytest.raises(DataError, match="at least one"):
            system_series([])


class TestDescribe:
    def test_normal_sample_shape_statistics(self):
        rng = np.random.default_rng(11)
        rec = describe(make_series(rng.standard_normal(100_000)))
        assert abs(rec["skewness"]) < 0.03
        assert abs(rec["kurtosis"] - 3.0) < 0.1
        assert abs(rec["sd"] - 1.0) < 0.02
        assert rec["min"] < rec["median"] < rec["max"]
        assert rec["n"] == 100_000

    def test_jarque_bera_p_uniform_under_null(self):
        rng = np.random.default_rng(12)
        pvals = [
            describe(make_series(rng.standard_normal(2000)))["jarque_bera_p"]
            for _ in range(200)
        ]
        assert stats.kstest(pvals, "uniform").pvalue > 0.01

    def test_mirrored_series_negates_skewness(self):
        rng = np.random.default_rng(13)
        x = rng.gamma(2.0, size=500) * 0.01
        fwd = describe(make_series(x))
        rev = describe(make_series(-x))
        assert fwd["skewness"] == -rev["skewness"]
        assert fwd["kurtosis"] == rev["kurtosis"]

    def test_serial_dependence_detected(self):
        rng = np.random.default_rng(14)
        z = rng.standard_normal(2000)
        ar = np.empty(2000)
        ar[0] = z[0]
        for t in range(1, 2000):
            ar[t] = 0.5 * ar[t - 1] + z[t]
        assert describe(make_series(ar))["ljung_box_p"] < 1e-10
        assert describe(make_series(z))["ljung_box_p"] > 0.01

    def test_degenerate_inputs_error(self):
        with pytest.raises(DataError, match="at least 30"):
            describe(make_series(np.zeros(29)))
        with pytest.raises(DataError, match="constant"):
            describe(make_series(np.ones(50)))


class TestKendallMatrix:
    def test_sorted_pair_is_one(self):
        x = np.linspace(0.0, 1.0, 60)
        mat = kendall_matrix([make_series(x, "a"), make_series(x**3, "b")])
        assert mat.loc["a", "b"] == pytest.approx(1.0, abs=1e-12)

    def test_ties_adjusted(self):
        # tau of a tied series with itself stays exactly 1 under the
        # tie-adjusted estimator
        x = np.repeat([1.0, 2.0, 3.0], 20) + np.tile([0.0, 0.0, 0.1, 0.0, 0.2], 12)
        mat = kendall_matrix([make_series(x, "a"), make_series(x, "b")])
        assert mat.loc["a", "b"] == pytest.approx(1.0, abs=1e-12)

    def test_independent_pairs_near_zero(self):
        rng = np.random.default_rng(15)
        a = make_series(rng.standard_normal(5000), "a")
        b = make_series(rng.standard_normal(5000), "b")
        mat = kendall_matrix([a, b])
        assert abs(mat.loc["a", "b"]) < 0.04

    def test_symmetry_and_diagonal_exact(self):
        rng = np.random.default_rng(16)
        series = [make_series(rng.standard_normal(200), name) for name in ("a", "b", "c")]
        mat = kendall_matrix(series)
        np.testing.assert_array_equal(mat.values, mat.values.T)
        np.testing.assert_array_equal(np.diag(mat.values), np.ones(3))

    def test_misaligned_error(self):
        a = make_series(np.zeros(10) + np.arange(10), "a")
        b = make_series(np.arange(12), "b")
        with pytest.raises(DataError, match="aligned"):
            kendall_matrix([a, b])
