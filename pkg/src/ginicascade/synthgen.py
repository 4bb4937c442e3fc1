"""Synthetic market days: noisy sine waves sampled at one-minute resolution
and aggregated into normalized five-minute OHLCV candles.

Each era (synthetic day) gets its own randomly drawn wave: amplitude,
frequency parameter K, phase (0 or 90 degrees) and direction. Two noise
sources are added on top: per-sample base noise N(0, sigma) and per-peak
amplitude noise N(0, sigma_p), where peaks are the spans between zero
crossings of the underlying sine. Wave parameters are drawn from an rng
stream keyed by era only, so different noise levels at the same seed share
identical waves and stay comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .candles import EraSeries, write_candles_csv
from .errors import EmptyInterval, LengthMismatch, ZeroFirstClose

SAMPLES_PER_DAY = 375
SAMPLES_PER_CANDLE = 5
CANDLES_PER_DAY = SAMPLES_PER_DAY // SAMPLES_PER_CANDLE

# rng sub-stream tags; wave parameters must not consume noise draws
_WAVE_STREAM = 101
_NOISE_STREAM = 202


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    sigma_p: float

    def __post_init__(self):
        if self.sigma < 0 or self.sigma_p < 0:
            raise ValueError("noise levels must be non-negative")

    def label(self) -> str:
        return f"[{self.sigma:g},{self.sigma_p:g}]"


# The eight (sigma, sigma_p) pairs used across the experiment grids.
NOISE_GRID: tuple[NoiseSpec, ...] = (
    NoiseSpec(0.0, 0.0),
    NoiseSpec(0.0, 0.05),
    NoiseSpec(0.01, 0.0),
    NoiseSpec(0.01, 0.05),
    NoiseSpec(0.03, 0.0),
    NoiseSpec(0.05, 0.05),
    NoiseSpec(0.075, 0.0),
    NoiseSpec(0.075, 0.05),
)


@dataclass(frozen=True)
class WaveSpec:
    """One era's wave: f(t) = 1 + eps(t) +/- A(1+eps_p[k]) sin((K+1)/2 pi t + phase)
    for K >= 1, or a straight line 1 + eps(t) +/- A t for K = 0."""

    amplitude: float
    peaks: int
    phase: float  # 0 or pi/2
    direction: int  # +1 or -1
    era: int


@dataclass(frozen=True)
class SynthConfig:
    amplitude_range: tuple[float, float] = (0.02, 0.10)
    peak_range: tuple[int, int] = (0, 8)

    def __post_init__(self):
        lo, hi = self.amplitude_range
        if not (0 < lo <= hi):
            raise ValueError("bad amplitude range")
        klo, khi = self.peak_range
        if not (0 <= klo <= khi):
            raise ValueError("bad peak range")


def _seed_parts(seed) -> list[int]:
    return [int(s) for s in seed] if isinstance(seed, (list, tuple)) else [int(seed)]


def wave_rng(seed, era: int) -> np.random.Generator:
    return np.random.default_rng([_WAVE_STREAM, era, *_seed_parts(seed)])


def noise_rng(seed, era: int) -> np.random.Generator:
    return np.random.default_rng([_NOISE_STREAM, era, *_seed_parts(seed)])


def plan_era(rng: np.random.Generator, era: int, config: SynthConfig) -> WaveSpec:
    """Draw one era's wave parameters from ``rng``."""
    lo, hi = config.amplitude_range
    amplitude = float(rng.uniform(lo, hi))
    klo, khi = config.peak_range
    peaks = int(rng.integers(klo, khi + 1))
    phase = math.pi / 2 if rng.integers(2) else 0.0
    direction = 1 if rng.integers(2) else -1
    return WaveSpec(amplitude=amplitude, peaks=peaks, phase=phase, direction=direction, era=era)


def peak_intervals(spec: WaveSpec) -> list[np.ndarray]:
    """Partition the 375 sample indices into spans between zero crossings of
    sin((K+1)/2 pi t + phase) on t in [0, 1].

    Crossings are computed analytically from the sine argument, so the
    partition does not depend on noise. A sample exactly on a crossing opens
    the next span. The realized span count follows from the crossings and can
    differ from K.
    """
    if spec.peaks < 1:
        raise ValueError("peak_intervals needs at least one peak")
    freq = (spec.peaks + 1) / 2.0  # sine argument is freq * pi * t + phase
    phase_turns = spec.phase / math.pi
    eps = 1e-12
    crossings = []
    for m in range(0, int(math.ceil(freq + phase_turns)) + 2):
        t = (m - phase_turns) / freq
        if eps < t < 1.0 - eps:
            crossings.append(t)
    t_grid = np.linspace(0.0, 1.0, SAMPLES_PER_DAY)
    which = np.searchsorted(np.asarray(crossings), t_grid, side="right")
    intervals = [np.flatnonzero(which == k) for k in range(len(crossings) + 1)]
    for k, idx in enumerate(intervals):
        if idx.size == 0:
            raise EmptyInterval(f"peak interval {k} received no samples")
    return intervals


def sample_wave(spec: WaveSpec, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """375 one-minute price samples of the noisy wave.

    Standard-normal draws are scaled by sigma / sigma_p, so the same rng state
    yields matched realizations across noise levels.
    """
    t = np.linspace(0.0, 1.0, SAMPLES_PER_DAY)
    base_noise = noise.sigma * rng.standard_normal(SAMPLES_PER_DAY)
    if spec.peaks == 0:
        wave = spec.amplitude * t
    else:
        intervals = peak_intervals(spec)
        peak_noise = noise.sigma_p * rng.standard_normal(len(intervals))
        amp = np.empty(SAMPLES_PER_DAY)
        for k, idx in enumerate(intervals):
            amp[idx] = spec.amplitude * (1.0 + peak_noise[k])
        wave = amp * np.sin((spec.peaks + 1) / 2.0 * math.pi * t + spec.phase)
    return 1.0 + base_noise + spec.direction * wave


def to_candles(prices: np.ndarray, era: int) -> EraSeries:
    """Aggregate 375 samples into 75 five-minute candles and normalize all
    OHLC values by the first candle's close. Synthetic volume is fixed at 1."""
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (SAMPLES_PER_DAY,):
        raise LengthMismatch(f"expected {SAMPLES_PER_DAY} samples, got {prices.shape}")
    groups = prices.reshape(CANDLES_PER_DAY, SAMPLES_PER_CANDLE)
    first_close = float(groups[0, -1])
    if first_close <= 0:
        raise ZeroFirstClose(f"era {era}: first candle close {first_close}")
    return EraSeries(
        era=era,
        open=groups[:, 0] / first_close,
        high=groups.max(axis=1) / first_close,
        low=groups.min(axis=1) / first_close,
        close=groups[:, -1] / first_close,
        volume=np.ones(CANDLES_PER_DAY),
        first_close_raw=first_close,
    )


def build_dataset(
    noise: NoiseSpec,
    eras: int,
    seed,
    config: SynthConfig = SynthConfig(),
) -> list[EraSeries]:
    """Generate ``eras`` independent synthetic days at one noise level."""
    if eras < 1:
        raise ValueError("need at least one era")
    out = []
    for era in range(eras):
        spec = plan_era(wave_rng(seed, era), era, config)
        prices = sample_wave(spec, noise, noise_rng(seed, era))
        out.append(to_candles(prices, era))
    return out


def synth_filename(noise: NoiseSpec) -> str:
    return f"synth_{noise.sigma:g}_{noise.sigma_p:g}.csv"


def write_dataset(series: list[EraSeries], noise: NoiseSpec, out_dir: str | Path) -> Path:
    path = Path(out_dir) / synth_filename(noise)
    write_candles_csv(series, path)
    return path
