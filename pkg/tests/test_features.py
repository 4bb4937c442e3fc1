import numpy as np
import pytest

from ginicascade.candles import EraSeries
from ginicascade.errors import InsufficientReference
from ginicascade.features import (
    BinThresholds,
    FeatureSpec,
    apply_bins,
    bin_values,
    bollinger,
    build_feature_table,
    build_raw_table,
    change_length,
    compute_indicators,
    compute_logical,
    compute_target,
    ema,
    fit_bins,
    read_bins_csv,
    read_feature_csv,
    rolling_slope,
    rsi,
    sma,
    write_bins_csv,
    write_feature_csv,
)
from ginicascade.synthgen import NoiseSpec, SynthConfig, build_dataset


def series_from_close(close, era=0, volume=None):
    close = np.asarray(close, dtype=float)
    volume = np.ones_like(close) if volume is None else np.asarray(volume, dtype=float)
    return EraSeries(
        era=era,
        open=close.copy(),
        high=close + 0.01,
        low=close - 0.01,
        close=close,
        volume=volume,
        first_close_raw=1.0,
    )


class TestIndicators:
    def test_sma_matches_brute_force(self, rng):
        x = rng.normal(size=60)
        out = sma(x, 10)
        assert np.isnan(out[:9]).all()
        for t in range(9, 60):
            assert out[t] == pytest.approx(np.mean(x[t - 9 : t + 1]))

    def test_sma_on_ramp(self):
        x = np.arange(50, dtype=float)
        out = sma(x, 10)
        assert out[20] == pytest.approx(np.mean(x[11:21]))

    def test_rsi_constant_is_50(self):
        out = rsi(np.full(40, 3.7), 14)
        assert np.isnan(out[:14]).all()
        np.testing.assert_allclose(out[14:], 50.0)

    def test_rsi_strict_uptrend_is_100(self):
        out = rsi(np.arange(40, dtype=float), 14)
        np.testing.assert_allclose(out[14:], 100.0)

    def test_rsi_bounds(self, rng):
        out = rsi(rng.normal(size=100).cumsum() + 50, 14)
        valid = out[~np.isnan(out)]
        assert np.all((valid >= 0) & (valid <= 100))

    def test_bollinger_constant(self):
        upper, lower, pctb = bollinger(np.full(30, 2.0), 20, 2.0)
        np.testing.assert_allclose(upper[19:], 2.0)
        np.testing.assert_allclose(lower[19:], 2.0)
        np.testing.assert_allclose(pctb[19:], 0.5)

    def test_bollinger_brute_force(self, rng):
        x = rng.normal(size=40)
        upper, lower, _ = bollinger(x, 20, 2.0)
        for t in range(19, 40):
            window = x[t - 19 : t + 1]
            assert upper[t] == pytest.approx(window.mean() + 2 * window.std())
            assert lower[t] == pytest.approx(window.mean() - 2 * window.std())

    def test_ema_seeded_with_sma(self):
        x = np.arange(20, dtype=float)
        out = ema(x, 5)
        assert np.isnan(out[:4]).all()
        assert out[4] == pytest.approx(2.0)

    def test_warmup_lengths(self):
        series = series_from_close(np.linspace(1.0, 1.2, 75))
        cols = compute_indicators(series)
        assert np.isnan(cols["close_sma20"][:19]).all() and not np.isnan(cols["close_sma20"][19])
        assert np.isnan(cols["rsi"][:14]).all() and not np.isnan(cols["rsi"][14])
        assert np.isnan(cols["macd"][:25]).all() and not np.isnan(cols["macd"][25])
        assert np.isnan(cols["macd_signal"][:33]).all() and not np.isnan(cols["macd_signal"][33])


class TestLogical:
    def test_doji_difference(self):
        series = series_from_close(np.linspace(1, 1.1, 75))
        cols = compute_logical(series, compute_indicators(series) | {"close_sma10": sma(series.close, 10), "close_sma20": sma(series.close, 20)})
        np.testing.assert_allclose(cols["open_minus_close"], 0.0)
        np.testing.assert_allclose(cols["high_minus_low"], 0.02)

    def test_slope_of_ramp(self):
        x = 3.0 + 0.25 * np.arange(40)
        for w in (3, 5, 10):
            out = rolling_slope(x, w)
            np.testing.assert_allclose(out[w - 1 :], 0.25)

    def test_slope_matches_polyfit(self, rng):
        x = rng.normal(size=30)
        out = rolling_slope(x, 3)
        for t in range(2, 30):
            expected = np.polyfit(np.arange(3), x[t - 2 : t + 1], 1)[0]
            assert out[t] == pytest.approx(expected)


class TestChangeLength:
    def test_hand_trace(self):
        np.testing.assert_array_equal(change_length(np.array([1.0, 2, 3, 2])), [0, 1, 2, -1])

    def test_flat(self):
        np.testing.assert_array_equal(change_length(np.array([5.0, 5, 5])), [0, 0, 0])

    def test_maximal_run(self):
        n = 12
        np.testing.assert_array_equal(change_length(np.arange(n, dtype=float)), np.arange(n))

    def test_sign_flip_at_extrema(self, rng):
        x = rng.normal(size=200).cumsum()
        out = change_length(x)
        for t in range(2, 200):
            if x[t - 1] > x[t - 2] and x[t] < x[t - 1]:  # local max
                assert out[t] == -1
            if x[t - 1] < x[t - 2] and x[t] > x[t - 1]:  # local min
                assert out[t] == 1

    def test_magnitude_bounded_by_index(self, rng):
        x = rng.normal(size=100)
        out = change_length(x)
        assert np.all(np.abs(out) <= np.arange(100))

    def test_nan_restarts_run(self):
        x = np.array([1.0, 2, np.nan, 3, 4])
        out = change_length(x)
        assert np.isnan(out[2])
        np.testing.assert_array_equal(out[[0, 1, 3, 4]], [0, 1, 0, 1])


class TestTarget:
    def test_constant_close(self):
        series = series_from_close(np.ones(75))
        out = compute_target(series, 10)
        np.testing.assert_allclose(out[:65], 0.0)
        assert np.isnan(out[65:]).all()

    def test_full_era_row_count(self):
        series = series_from_close(np.ones(75))
        assert np.sum(~np.isnan(compute_target(series, 10))) == 65

    def test_ramp(self):
        series = series_from_close(1.0 + 0.01 * np.arange(75))
        out = compute_target(series, 10)
        np.testing.assert_allclose(out[:65], 0.1)


class TestBins:
    def test_percentile_oracle(self):
        col = np.arange(1.0, 101.0)
        cuts = np.percentile(col, [20, 40, 60, 80])
        # sort-based oracle: cut k sits between elements 20k and 20k+1
        s = np.sort(col)
        for k, c in enumerate(cuts, start=1):
            assert s[20 * k - 1] <= c <= s[20 * k]
        bins = bin_values(col, cuts)
        counts = np.bincount(bins, minlength=5)
        assert np.all(np.abs(counts - 20) <= 1)

    def test_equal_population_on_reference(self, rng):
        values = rng.normal(size=(500, 3))
        target = rng.normal(size=500)
        from ginicascade.features import RawFeatureTable

        table = RawFeatureTable(
            names=["a", "b", "c"],
            era=np.zeros(500, dtype=int),
            t=np.arange(500),
            series_idx=np.zeros(500, dtype=int),
            values=values,
            target=target,
        )
        thresholds = fit_bins(table)
        binned = apply_bins(table, thresholds)
        for j in range(3):
            counts = np.bincount(binned.X[:, j], minlength=5)
            assert np.all(np.abs(counts - 100) <= 1)
        assert np.all(np.abs(np.bincount(binned.y, minlength=5) - 100) <= 1)

    def test_boundary_goes_to_lower_bin(self):
        cuts = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(bin_values(np.array([0.5, 1.0, 2.0, 3.5, 4.0, 9.0]), cuts), [0, 0, 1, 3, 3, 4])

    def test_constant_column_goes_to_bin_zero(self):
        cuts = np.array([2.0, 2.0, 2.0, 2.0])
        np.testing.assert_array_equal(bin_values(np.array([1.9, 2.0, 2.1]), cuts), [0, 0, 4])

    def test_two_point_column_monotone_cuts(self):
        cuts = np.percentile(np.array([0.0, 1.0] * 10), [20, 40, 60, 80])
        assert np.all(np.diff(cuts) >= 0)

    def test_insufficient_reference(self):
        from ginicascade.features import RawFeatureTable

        table = RawFeatureTable(
            names=["a"],
            era=np.zeros(3, dtype=int),
            t=np.arange(3),
            series_idx=np.zeros(3, dtype=int),
            values=np.zeros((3, 1)),
            target=np.zeros(3),
        )
        with pytest.raises(InsufficientReference):
            fit_bins(table)

    def test_fit_invariant_to_row_order(self, rng):
        from ginicascade.features import RawFeatureTable

        values = rng.normal(size=(50, 2))
        target = rng.normal(size=50)
        perm = rng.permutation(50)
        t1 = RawFeatureTable(["a", "b"], np.zeros(50, int), np.arange(50), np.zeros(50, int), values, target)
        t2 = RawFeatureTable(["a", "b"], np.zeros(50, int), np.arange(50), np.zeros(50, int), values[perm], target[perm])
        b1, b2 = fit_bins(t1), fit_bins(t2)
        for name in b1.cuts:
            np.testing.assert_allclose(b1.cuts[name], b2.cuts[name])


class TestTableBuild:
    def make_tables(self, eras=4, seed=2):
        cfg = SynthConfig(amplitude_range=(0.05, 0.07), peak_range=(13, 13))
        data = build_dataset(NoiseSpec(0.01, 0.05), eras, seed=seed, config=cfg)
        ref = build_dataset(NoiseSpec(0.01, 0.05), 3, seed=seed + 100, config=cfg)
        return data, ref

    def test_rows_and_shape(self):
        data, ref = self.make_tables()
        table, thresholds = build_feature_table(data, ref)
        assert len(table.names) == 44
        assert len(table) == 4 * 32  # t = 33..64 after warm-up and horizon
        assert table.t.min() == 33 and table.t.max() == 64
        assert np.all((table.X >= 0) & (table.X <= 4))
        assert np.all((table.y >= 0) & (table.y <= 4))

    def test_no_lookahead_except_target(self):
        # changing candles beyond t+10 must not affect row t
        data, ref = self.make_tables(eras=1)
        thresholds = fit_bins(build_raw_table(ref))
        base = apply_bins(build_raw_table(data), thresholds)
        t_probe = 40
        row_before = base.X[base.t == t_probe][0].copy()
        tampered = data[0]
        for arr in (tampered.open, tampered.high, tampered.low, tampered.close, tampered.volume):
            arr[t_probe + 11 :] = arr[t_probe + 11 :] * 1.5 + 0.3
        after = apply_bins(build_raw_table([tampered]), thresholds)
        np.testing.assert_array_equal(after.X[after.t == t_probe][0], row_before)

    def test_constant_volume_flows_through(self):
        data, ref = self.make_tables(eras=2)
        table, _ = build_feature_table(data, ref)
        vol_cols = [j for j, n in enumerate(table.names) if n.startswith("volume") or n == "cl_volume"]
        for j in vol_cols:
            assert np.all(table.X[:, j] == 0)

    def test_csv_round_trips(self, tmp_path):
        data, ref = self.make_tables(eras=2)
        table, thresholds = build_feature_table(data, ref)
        fpath = tmp_path / "features.csv"
        write_feature_csv(table, fpath)
        loaded = read_feature_csv(fpath)
        assert loaded.names == table.names
        np.testing.assert_array_equal(loaded.X, table.X)
        np.testing.assert_array_equal(loaded.y, table.y)
        np.testing.assert_array_equal(loaded.era, table.era)

        bpath = tmp_path / "bins.csv"
        write_bins_csv(thresholds, bpath)
        loaded_bins = read_bins_csv(bpath)
        assert set(loaded_bins.cuts) == set(thresholds.cuts)
        for name in thresholds.cuts:
            np.testing.assert_array_equal(loaded_bins.cuts[name], thresholds.cuts[name])
