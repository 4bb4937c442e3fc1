"""Market-data ingestion: five-minute OHLCV CSVs grouped into days, prices
normalized by each day's first close and volumes by per-ticker historical
averages."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .candles import EraSeries
from .errors import EmptyFile, MissingBaseline, ParseError, ZeroFirstClose

log = logging.getLogger(__name__)

OHLCV_HEADER = ["ticker", "date", "time", "open", "high", "low", "close", "volume"]

# ticker -> average 5-minute volume from a prior period
VolumeBaseline = dict[str, float]


@dataclass
class RawDayRecord:
    ticker: str
    date: dt.date
    times: list[dt.time]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __len__(self) -> int:
        return int(self.close.size)


def _parse_time(text: str) -> dt.time:
    for fmt in ("%H:%M:%S", "%H:%M"):
        try:
            return dt.datetime.strptime(text, fmt).time()
        except ValueError:
            continue
    raise ValueError(f"bad time {text!r}")


def parse_ohlcv_csv(path: str | Path) -> list[RawDayRecord]:
    """Parse and group rows by (ticker, date), sorted by time within each day.

    Malformed rows raise ParseError carrying the 1-based line number.
    """
    grouped: dict[tuple[str, dt.date], list[tuple[dt.time, float, float, float, float, float]]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(str(path))
        if [h.strip().lower() for h in header] != OHLCV_HEADER:
            raise ParseError(1, f"expected header {','.join(OHLCV_HEADER)}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(OHLCV_HEADER):
                raise ParseError(lineno, f"expected {len(OHLCV_HEADER)} columns, got {len(row)}")
            ticker = row[0].strip()
            if not ticker:
                raise ParseError(lineno, "empty ticker")
            try:
                date = dt.date.fromisoformat(row[1].strip())
                time = _parse_time(row[2].strip())
                o, h, lo, c, v = (float(x) for x in row[3:8])
            except ValueError as exc:
                raise ParseError(lineno, str(exc))
            if min(o, h, lo, c) <= 0:
                raise ParseError(lineno, f"non-positive price in {row[3:7]}")
            if v < 0:
                raise ParseError(lineno, f"negative volume {v}")
            grouped.setdefault((ticker, date), []).append((time, o, h, lo, c, v))
    if not grouped:
        raise EmptyFile(str(path))

    records = []
    for (ticker, date), rows in sorted(grouped.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        rows.sort(key=lambda r: r[0])
        arr = np.asarray([r[1:] for r in rows], dtype=float)
        records.append(
            RawDayRecord(
                ticker=ticker,
                date=date,
                times=[r[0] for r in rows],
                open=arr[:, 0],
                high=arr[:, 1],
                low=arr[:, 2],
                close=arr[:, 3],
                volume=arr[:, 4],
            )
        )
    return records


def normalize_day(day: RawDayRecord, reference_date: dt.date) -> EraSeries:
    """Divide the day's OHLC by its first close; era id is days since
    ``reference_date``. Volume is passed through raw (see normalize_volume)."""
    if len(day) == 0:
        raise ZeroFirstClose(f"{day.ticker} {day.date}: empty day")
    first_close = float(day.close[0])
    if first_close <= 0:
        raise ZeroFirstClose(f"{day.ticker} {day.date}: first close {first_close}")
    return EraSeries(
        era=(day.date - reference_date).days,
        open=day.open / first_close,
        high=day.high / first_close,
        low=day.low / first_close,
        close=day.close / first_close,
        volume=day.volume.copy(),
        first_close_raw=first_close,
    )


def normalize_volume(day: RawDayRecord, baseline: VolumeBaseline) -> np.ndarray:
    """Each 5-minute volume divided by the ticker's prior-period average."""
    if day.ticker not in baseline:
        raise MissingBaseline(day.ticker)
    avg = baseline[day.ticker]
    if avg <= 0:
        raise MissingBaseline(day.ticker)
    return day.volume / avg


def read_volume_baseline(path: str | Path) -> VolumeBaseline:
    """Two-column CSV ticker,avg_volume."""
    out: VolumeBaseline = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(str(path))
        if [h.strip().lower() for h in header] != ["ticker", "avg_volume"]:
            raise ParseError(1, f"expected header ticker,avg_volume, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                out[row[0].strip()] = float(row[1])
            except (ValueError, IndexError) as exc:
                raise ParseError(lineno, str(exc))
    if not out:
        raise EmptyFile(str(path))
    return out


def load_market_dataset(
    path: str | Path,
    baseline_path: str | Path,
    reference_date: dt.date,
    expected_candles: int = 75,
) -> list[EraSeries]:
    """Full ingestion: parse, normalize prices and volumes.

    Short days are kept (real sessions vary) but logged; downstream features
    simply produce fewer rows for them.
    """
    baseline = read_volume_baseline(baseline_path)
    days = parse_ohlcv_csv(path)
    out = []
    for day in days:
        if len(day) != expected_candles:
            log.warning("%s %s has %d candles, expected %d", day.ticker, day.date, len(day), expected_candles)
        series = normalize_day(day, reference_date)
        series.volume = normalize_volume(day, baseline)
        out.append(series)
    return out
