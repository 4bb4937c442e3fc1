"""Normalized OHLCV candle series for one era (a real or synthetic day)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, EmptyFile


@dataclass
class EraSeries:
    """One day's worth of candles, prices normalized by the first candle's close.

    ``first_close_raw`` is the divisor that was applied, so raw prices can be
    recovered when needed.
    """

    era: int
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    first_close_raw: float

    def __len__(self) -> int:
        return int(self.close.size)

    def validate(self) -> None:
        n = len(self)
        for name in ("open", "high", "low", "volume"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} has wrong length")
        if not np.all(self.low <= np.minimum(self.open, self.close) + 1e-12):
            raise ValueError("low above open/close")
        if not np.all(self.high >= np.maximum(self.open, self.close) - 1e-12):
            raise ValueError("high below open/close")


CANDLE_CSV_HEADER = ["era", "candle_index", "open", "high", "low", "close", "volume"]


def write_candles_csv(series: list[EraSeries], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CANDLE_CSV_HEADER)
        for s in series:
            for i in range(len(s)):
                w.writerow(
                    [
                        s.era,
                        i,
                        repr(float(s.open[i])),
                        repr(float(s.high[i])),
                        repr(float(s.low[i])),
                        repr(float(s.close[i])),
                        repr(float(s.volume[i])),
                    ]
                )


def read_candles_csv(path: str | Path) -> list[EraSeries]:
    """Inverse of write_candles_csv. Candle rows must be grouped per era."""
    rows_by_era: dict[int, list[list[float]]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(str(path))
        if header != CANDLE_CSV_HEADER:
            raise ParseError(1, f"unexpected header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                era = int(row[0])
                vals = [float(v) for v in row[2:7]]
            except (ValueError, IndexError) as exc:
                raise ParseError(lineno, str(exc))
            rows_by_era.setdefault(era, []).append(vals)
    if not rows_by_era:
        raise EmptyFile(str(path))
    out = []
    for era in sorted(rows_by_era):
        arr = np.asarray(rows_by_era[era], dtype=float)
        out.append(
            EraSeries(
                era=era,
                open=arr[:, 0],
                high=arr[:, 1],
                low=arr[:, 2],
                close=arr[:, 3],
                volume=arr[:, 4],
                first_close_raw=float("nan"),
            )
        )
    return out
