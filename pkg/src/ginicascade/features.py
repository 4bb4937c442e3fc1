"""Feature pipeline over candle series: technical indicators, logical and
temporal columns, a forward-return target, and leak-free percentile binning.

Warm-up positions of every indicator are NaN; a row survives only if all of
its feature values and its target are present. Bin thresholds are fit on an
independent reference table and then applied unchanged to train/test data,
so discretization never sees the modeled data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .candles import EraSeries
from .errors import InsufficientReference, ParseError, EmptyFile

N_BINS = 5


@dataclass(frozen=True)
class FeatureSpec:
    sma_windows: tuple[int, int] = (10, 20)
    rsi_period: int = 14
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    bollinger_window: int = 20
    bollinger_width: float = 2.0
    slope_windows: tuple[int, ...] = (3, 5, 10)
    target_horizon: int = 10
    # column names excluded from change-length augmentation
    change_length_exclude: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# column primitives (NaN marks warm-up)
# ---------------------------------------------------------------------------


def sma(x: np.ndarray, window: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.full(x.size, np.nan)
    if x.size >= window:
        kernel = np.ones(window) / window
        out[window - 1 :] = np.convolve(x, kernel, mode="valid")
    return out


def ema(x: np.ndarray, span: int) -> np.ndarray:
    """Exponential moving average seeded with the SMA of the first ``span``
    values; positions before the seed are NaN."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.size, np.nan)
    if x.size < span:
        return out
    alpha = 2.0 / (span + 1.0)
    out[span - 1] = np.mean(x[:span])
    for t in range(span, x.size):
        out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return out


def rsi(close: np.ndarray, period: int = 14) -> np.ndarray:
    """Relative strength index with Wilder smoothing; 50 when there has been
    no movement at all (avoids 0/0)."""
    close = np.asarray(close, dtype=float)
    out = np.full(close.size, np.nan)
    if close.size <= period:
        return out
    delta = np.diff(close)
    gains = np.clip(delta, 0.0, None)
    losses = np.clip(-delta, 0.0, None)
    avg_gain = float(np.mean(gains[:period]))
    avg_loss = float(np.mean(losses[:period]))
    for t in range(period, close.size):
        if t > period:
            avg_gain = (avg_gain * (period - 1) + gains[t - 1]) / period
            avg_loss = (avg_loss * (period - 1) + losses[t - 1]) / period
        if avg_loss == 0.0 and avg_gain == 0.0:
            out[t] = 50.0
        elif avg_loss == 0.0:
            out[t] = 100.0
        else:
            out[t] = 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    return out


def macd(
    close: np.ndarray, fast: int = 12, slow: int = 26, signal: int = 9
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    line = ema(close, fast) - ema(close, slow)
    valid = np.flatnonzero(~np.isnan(line))
    signal_line = np.full(line.size, np.nan)
    if valid.size:
        signal_line[valid] = ema(line[valid], signal)
    hist = line - signal_line
    return line, signal_line, hist


def bollinger(
    close: np.ndarray, window: int = 20, width: float = 2.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Upper band, lower band and percent-b. Zero-width windows (constant
    prices) give upper == lower == mean and percent-b 0.5."""
    close = np.asarray(close, dtype=float)
    n = close.size
    mid = sma(close, window)
    std = np.full(n, np.nan)
    if n >= window:
        windows = np.lib.stride_tricks.sliding_window_view(close, window)
        std[window - 1 :] = windows.std(axis=1)
    upper = mid + width * std
    lower = mid - width * std
    span = upper - lower
    pctb = np.full(n, np.nan)
    ok = ~np.isnan(span)
    zero = ok & (span == 0)
    pos = ok & (span != 0)
    pctb[pos] = (close[pos] - lower[pos]) / span[pos]
    pctb[zero] = 0.5
    return upper, lower, pctb


def rolling_slope(x: np.ndarray, window: int) -> np.ndarray:
    """Least-squares slope of the trailing ``window`` values (unit x spacing)."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.size, np.nan)
    if x.size < window:
        return out
    centered = np.arange(window) - (window - 1) / 2.0
    denom = float(np.sum(centered**2))
    out[window - 1 :] = np.convolve(x, centered[::-1], mode="valid") / denom
    return out


def change_length(x: np.ndarray) -> np.ndarray:
    """Signed count of consecutive strictly monotone steps ending at each
    index: positive while increasing, negative while decreasing, 0 after a
    flat step or at the start of a valid run. NaN where the input is NaN."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.size, np.nan)
    prev_val = np.nan
    prev_cl = 0.0
    for t in range(x.size):
        if np.isnan(x[t]):
            prev_val = np.nan
            continue
        if np.isnan(prev_val):
            cl = 0.0
        elif x[t] > prev_val:
            cl = prev_cl + 1 if prev_cl > 0 else 1.0
        elif x[t] < prev_val:
            cl = prev_cl - 1 if prev_cl < 0 else -1.0
        else:
            cl = 0.0
        out[t] = cl
        prev_val = x[t]
        prev_cl = cl
    return out


# ---------------------------------------------------------------------------
# per-era assembly
# ---------------------------------------------------------------------------


def compute_indicators(series: EraSeries, spec: FeatureSpec = FeatureSpec()) -> dict[str, np.ndarray]:
    w1, w2 = spec.sma_windows
    cols: dict[str, np.ndarray] = {}
    cols[f"close_sma{w1}"] = sma(series.close, w1)
    cols[f"close_sma{w2}"] = sma(series.close, w2)
    cols[f"volume_sma{w1}"] = sma(series.volume, w1)
    cols[f"volume_sma{w2}"] = sma(series.volume, w2)
    cols["rsi"] = rsi(series.close, spec.rsi_period)
    line, sig, hist = macd(series.close, spec.macd_fast, spec.macd_slow, spec.macd_signal)
    cols["macd"] = line
    cols["macd_signal"] = sig
    cols["macd_hist"] = hist
    upper, lower, pctb = bollinger(series.close, spec.bollinger_window, spec.bollinger_width)
    cols["boll_upper"] = upper
    cols["boll_lower"] = lower
    cols["boll_pctb"] = pctb
    return cols


def compute_logical(
    series: EraSeries,
    indicators: dict[str, np.ndarray],
    spec: FeatureSpec = FeatureSpec(),
) -> dict[str, np.ndarray]:
    w1, w2 = spec.sma_windows
    cols: dict[str, np.ndarray] = {}
    cols["open_minus_close"] = series.open - series.close
    cols["high_minus_low"] = series.high - series.low
    cols[f"sma{w2}_minus_sma{w1}"] = indicators[f"close_sma{w2}"] - indicators[f"close_sma{w1}"]
    for w in spec.slope_windows:
        cols[f"close_slope{w}"] = rolling_slope(series.close, w)
    return cols


def compute_target(series: EraSeries, horizon: int = 10) -> np.ndarray:
    """close(t + horizon) - close(t); NaN once the horizon runs past the era."""
    close = np.asarray(series.close, dtype=float)
    out = np.full(close.size, np.nan)
    if close.size > horizon:
        out[: close.size - horizon] = close[horizon:] - close[: close.size - horizon]
    return out


def era_columns(series: EraSeries, spec: FeatureSpec = FeatureSpec()) -> dict[str, np.ndarray]:
    """All real-valued feature columns for one era, in a fixed order: base
    OHLCV, indicators, logical columns, then change-length of each of those."""
    cols: dict[str, np.ndarray] = {
        "open": np.asarray(series.open, dtype=float),
        "high": np.asarray(series.high, dtype=float),
        "low": np.asarray(series.low, dtype=float),
        "close": np.asarray(series.close, dtype=float),
        "volume": np.asarray(series.volume, dtype=float),
    }
    cols.update(compute_indicators(series, spec))
    cols.update(compute_logical(series, cols, spec))
    for name in list(cols.keys()):
        if name in spec.change_length_exclude:
            continue
        cols[f"cl_{name}"] = change_length(cols[name])
    return cols


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


@dataclass
class RawFeatureTable:
    """Rows with real-valued features and target, ready for bin fitting or
    transformation. ``series_idx`` disambiguates rows when several series
    share an era id (multiple tickers on the same day)."""

    names: list[str]
    era: np.ndarray
    t: np.ndarray
    series_idx: np.ndarray
    values: np.ndarray  # (n_rows, n_features)
    target: np.ndarray  # (n_rows,)

    def __len__(self) -> int:
        return int(self.target.size)


@dataclass
class FeatureTable:
    """Fully discretized rows: feature bins and target bin, both in 0..4."""

    names: list[str]
    era: np.ndarray
    t: np.ndarray
    series_idx: np.ndarray
    X: np.ndarray  # (n_rows, n_features) int bins
    y: np.ndarray  # (n_rows,) int bins

    def __len__(self) -> int:
        return int(self.y.size)

    def subset(self, mask: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            names=self.names,
            era=self.era[mask],
            t=self.t[mask],
            series_idx=self.series_idx[mask],
            X=self.X[mask],
            y=self.y[mask],
        )


def build_raw_table(series_list: list[EraSeries], spec: FeatureSpec = FeatureSpec()) -> RawFeatureTable:
    """Compute features for every era and keep only rows where every feature
    and the target are present."""
    names: list[str] | None = None
    eras, ts, sidx, rows, targets = [], [], [], [], []
    for s_i, series in enumerate(series_list):
        cols = era_columns(series, spec)
        if names is None:
            names = list(cols.keys())
        matrix = np.column_stack([cols[n] for n in names])
        target = compute_target(series, spec.target_horizon)
        ok = ~np.isnan(matrix).any(axis=1) & ~np.isnan(target)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            continue
        eras.append(np.full(idx.size, series.era, dtype=int))
        ts.append(idx.astype(int))
        sidx.append(np.full(idx.size, s_i, dtype=int))
        rows.append(matrix[idx])
        targets.append(target[idx])
    if names is None or not rows:
        return RawFeatureTable(
            names=names or [],
            era=np.empty(0, dtype=int),
            t=np.empty(0, dtype=int),
            series_idx=np.empty(0, dtype=int),
            values=np.empty((0, len(names or []))),
            target=np.empty(0),
        )
    return RawFeatureTable(
        names=names,
        era=np.concatenate(eras),
        t=np.concatenate(ts),
        series_idx=np.concatenate(sidx),
        values=np.vstack(rows),
        target=np.concatenate(targets),
    )


TARGET_COLUMN = "target"


@dataclass
class BinThresholds:
    """Per-column cut points at the 20/40/60/80th percentiles of a reference
    table. The target's cuts are stored under TARGET_COLUMN."""

    cuts: dict[str, np.ndarray] = field(default_factory=dict)

    def for_column(self, name: str) -> np.ndarray:
        return self.cuts[name]


def fit_bins(reference: RawFeatureTable) -> BinThresholds:
    """Percentile cut points per feature column and for the target."""
    if len(reference) < N_BINS:
        raise InsufficientReference(f"{len(reference)} reference rows, need at least {N_BINS}")
    qs = [100.0 * k / N_BINS for k in range(1, N_BINS)]
    cuts: dict[str, np.ndarray] = {}
    for j, name in enumerate(reference.names):
        cuts[name] = np.percentile(reference.values[:, j], qs)
    cuts[TARGET_COLUMN] = np.percentile(reference.target, qs)
    return BinThresholds(cuts=cuts)


def bin_values(values: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    """Bin index per value: 0 iff v <= c1, k iff c_k < v <= c_{k+1}, 4 iff
    v > c4. A value equal to a cut goes to the lower bin."""
    return np.searchsorted(np.asarray(cuts, dtype=float), np.asarray(values, dtype=float), side="left")


def apply_bins(raw: RawFeatureTable, thresholds: BinThresholds) -> FeatureTable:
    X = np.empty((len(raw), len(raw.names)), dtype=int)
    for j, name in enumerate(raw.names):
        X[:, j] = bin_values(raw.values[:, j], thresholds.for_column(name))
    y = bin_values(raw.target, thresholds.for_column(TARGET_COLUMN))
    return FeatureTable(
        names=list(raw.names),
        era=raw.era.copy(),
        t=raw.t.copy(),
        series_idx=raw.series_idx.copy(),
        X=X,
        y=y,
    )


def build_feature_table(
    series_list: list[EraSeries],
    reference_list: list[EraSeries],
    spec: FeatureSpec = FeatureSpec(),
) -> tuple[FeatureTable, BinThresholds]:
    """Convenience: fit bins on the reference series, then transform the data."""
    thresholds = fit_bins(build_raw_table(reference_list, spec))
    return apply_bins(build_raw_table(series_list, spec), thresholds), thresholds


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def write_feature_csv(table: FeatureTable, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["era", "t", "series"] + table.names + [TARGET_COLUMN])
        for i in range(len(table)):
            w.writerow(
                [int(table.era[i]), int(table.t[i]), int(table.series_idx[i])]
                + [int(v) for v in table.X[i]]
                + [int(table.y[i])]
            )


def read_feature_csv(path: str | Path) -> FeatureTable:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(str(path))
        if header[:3] != ["era", "t", "series"] or header[-1] != TARGET_COLUMN:
            raise ParseError(1, f"unexpected feature header {header[:4]}...")
        names = header[3:-1]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([int(v) for v in row])
            except ValueError as exc:
                raise ParseError(lineno, str(exc))
    if not rows:
        raise EmptyFile(str(path))
    arr = np.asarray(rows, dtype=int)
    return FeatureTable(
        names=names,
        era=arr[:, 0],
        t=arr[:, 1],
        series_idx=arr[:, 2],
        X=arr[:, 3:-1],
        y=arr[:, -1],
    )


def write_bins_csv(thresholds: BinThresholds, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["feature", "c1", "c2", "c3", "c4"])
        for name, cuts in thresholds.cuts.items():
            w.writerow([name] + [repr(float(c)) for c in cuts])


def read_bins_csv(path: str | Path) -> BinThresholds:
    cuts: dict[str, np.ndarray] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(str(path))
        if header != ["feature", "c1", "c2", "c3", "c4"]:
            raise ParseError(1, f"unexpected bins header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cuts[row[0]] = np.asarray([float(v) for v in row[1:5]])
            except (ValueError, IndexError) as exc:
                raise ParseError(lineno, str(exc))
    if not cuts:
        raise EmptyFile(str(path))
    return BinThresholds(cuts=cuts)
