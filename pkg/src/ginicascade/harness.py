"""Experiment orchestration: six train/test protocols, k-fold hyperparameter
selection and report emission.

Protocols (per experiment id):
  1  temporal 80/20 within every era
  2  disjoint era halves (train eras never appear in the test set)
  3  temporal 80/20 within a single era, averaged over eras
  4  one full era trains, a different full era tests, over consecutive pairs
  5  train on the clean noise level, test on a noisy one
  6  train on a noisy level, test on the clean one

A run trains one cascade per grid point; the "base" model is the cascade's
first level evaluated without the impurity gate, so base and cascade share
training data and initialization exactly.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .cascade import Cascade, CascadeConfig, evaluate, train_cascade
from .config import (
    cascade_config,
    config_hash,
    feature_spec,
    noise_grid,
    synth_config,
)
from .errors import ConfigError, IoError, TooFewEras, TooFewRows
from .features import FeatureTable, build_feature_table
from .models import ModelConfig, build_model, train_model
from .synthgen import NoiseSpec, build_dataset

EXPERIMENT_IDS = (1, 2, 3, 4, 5, 6)

# second seed component separating data eras from bin-reference eras
_DATA_TAG = 0
_REFERENCE_TAG = 1


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------


def synth_feature_table(noise: NoiseSpec, cfg: dict, eras: int, seed: int) -> FeatureTable:
    """Generate one noise level's eras, fit bins on an independent reference
    sample at the same noise level, and return the binned rows."""
    sc = synth_config(cfg)
    fs = feature_spec(cfg)
    data = build_dataset(noise, eras, [seed, _DATA_TAG], sc)
    reference = build_dataset(noise, cfg["experiment"]["reference_eras"], [seed, _REFERENCE_TAG], sc)
    table, _ = build_feature_table(data, reference, fs)
    return table


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


@dataclass
class SplitPair:
    label: str
    train: FeatureTable
    test: FeatureTable


def _era_prefix_split(table: FeatureTable, eras: list[int], fraction: float) -> tuple[np.ndarray, np.ndarray]:
    train_idx, test_idx = [], []
    for era in eras:
        rows = np.flatnonzero(table.era == era)
        rows = rows[np.argsort(table.t[rows], kind="stable")]
        cut = int(len(rows) * fraction)
        train_idx.append(rows[:cut])
        test_idx.append(rows[cut:])
    return np.concatenate(train_idx), np.concatenate(test_idx)


def split(
    experiment_id: int,
    table: FeatureTable,
    train_fraction: float = 0.8,
    other: FeatureTable | None = None,
) -> list[SplitPair]:
    """Train/test pairs for one experiment protocol. Ids 5/6 take the data of
    the second noise level as ``other`` (5: train=table/clean, test=other;
    6: train=table/noisy, test=other)."""
    if experiment_id not in EXPERIMENT_IDS:
        raise ConfigError(f"unknown experiment id {experiment_id}")
    eras = sorted(set(int(e) for e in table.era))
    if experiment_id == 1:
        tr, te = _era_prefix_split(table, eras, train_fraction)
        return [SplitPair("all-eras", table.subset(tr), table.subset(te))]
    if experiment_id == 2:
        if len(eras) < 2:
            raise TooFewEras("experiment 2 needs at least two eras")
        half = len(eras) // 2
        train_eras = set(eras[:half])
        test_eras = set(eras[half : 2 * half])
        tr = np.isin(table.era, sorted(train_eras))
        te = np.isin(table.era, sorted(test_eras))
        return [SplitPair("disjoint-eras", table.subset(tr), table.subset(te))]
    if experiment_id == 3:
        pairs = []
        for era in eras:
            tr, te = _era_prefix_split(table, [era], train_fraction)
            pairs.append(SplitPair(f"era-{era}", table.subset(tr), table.subset(te)))
        return pairs
    if experiment_id == 4:
        if len(eras) < 2:
            raise TooFewEras("experiment 4 needs at least two eras")
        pairs = []
        for a, b in zip(eras[:-1], eras[1:]):
            pairs.append(
                SplitPair(
                    f"era-{a}-to-{b}",
                    table.subset(table.era == a),
                    table.subset(table.era == b),
                )
            )
        return pairs
    # cross-noise protocols
    if other is None:
        raise ConfigError(f"experiment {experiment_id} needs both noise levels")
    return [SplitPair("cross-noise", table, other)]


# ---------------------------------------------------------------------------
# grid point execution
# ---------------------------------------------------------------------------


@dataclass
class LevelRow:
    level: int
    train_reached: int
    train_answered: int
    train_correct: int
    test_reached: int
    test_answered: int
    test_correct: int

    @staticmethod
    def _acc(correct: int, answered: int) -> float | None:
        return correct / answered if answered else None

    @property
    def train_accuracy(self) -> float | None:
        return self._acc(self.train_correct, self.train_answered)

    @property
    def test_accuracy(self) -> float | None:
        return self._acc(self.test_correct, self.test_answered)

    @property
    def train_unpruned(self) -> float:
        return self.train_answered / self.train_reached if self.train_reached else 0.0

    @property
    def test_unpruned(self) -> float:
        return self.test_answered / self.test_reached if self.test_reached else 0.0


@dataclass
class GridPointResult:
    label: str
    n_train_rows: int
    n_test_rows: int
    base_train_accuracy: float | None
    base_test_accuracy: float | None
    cascade_train_accuracy: float | None
    cascade_train_support: float
    cascade_test_accuracy: float | None
    cascade_test_support: float
    levels: list[LevelRow]
    base_test_confusion: np.ndarray
    cascade_test_confusion: np.ndarray
    base_test_trades: metrics.TradeReport
    cascade_test_trades: metrics.TradeReport


def _plain_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float | None:
    return float(np.mean(y_pred == y_true)) if y_true.size else None


def run_grid_point(
    label: str,
    pairs: list[SplitPair],
    ccfg: CascadeConfig,
    seed: int,
) -> tuple[GridPointResult, list[Cascade]]:
    """Train one cascade per split pair and pool outcomes across pairs
    (single-pair protocols just pass through)."""
    base_train_pred, base_train_y = [], []
    base_test_pred, base_test_y = [], []
    casc_train_pred, casc_train_y = [], []
    casc_test_pred, casc_test_y = [], []
    level_rows = [LevelRow(k + 1, 0, 0, 0, 0, 0, 0) for k in range(ccfg.levels)]
    cascades = []
    for p_i, pair in enumerate(pairs):
        cascade = train_cascade(ccfg, pair.train, seed=[seed, p_i])
        cascades.append(cascade)
        base = cascade.models[0]
        for side, table, pred_sink, y_sink, casc_sink, casc_y_sink in (
            ("train", pair.train, base_train_pred, base_train_y, casc_train_pred, casc_train_y),
            ("test", pair.test, base_test_pred, base_test_y, casc_test_pred, casc_test_y),
        ):
            if len(table) == 0:
                continue
            X = table.X.astype(float)
            pred_sink.append(base.predict_proba(X).argmax(axis=1))
            y_sink.append(table.y)
            ev = evaluate(cascade, table)
            casc_sink.append(ev.outcomes.classes)
            casc_y_sink.append(table.y)
            for lv in ev.levels:
                row = level_rows[lv.level - 1]
                if side == "train":
                    row.train_reached += lv.reached
                    row.train_answered += lv.answered
                    row.train_correct += lv.correct
                else:
                    row.test_reached += lv.reached
                    row.test_answered += lv.answered
                    row.test_correct += lv.correct

    def cat(parts):
        return np.concatenate(parts) if parts else np.empty(0, dtype=int)

    b_tr_p, b_tr_y = cat(base_train_pred), cat(base_train_y)
    b_te_p, b_te_y = cat(base_test_pred), cat(base_test_y)
    c_tr_p, c_tr_y = cat(casc_train_pred), cat(casc_train_y)
    c_te_p, c_te_y = cat(casc_test_pred), cat(casc_test_y)

    casc_train = metrics.accuracy_support(c_tr_y, c_tr_p)
    casc_test = metrics.accuracy_support(c_te_y, c_te_p)
    result = GridPointResult(
        label=label,
        n_train_rows=int(b_tr_y.size),
        n_test_rows=int(b_te_y.size),
        base_train_accuracy=_plain_accuracy(b_tr_y, b_tr_p),
        base_test_accuracy=_plain_accuracy(b_te_y, b_te_p),
        cascade_train_accuracy=casc_train.accuracy,
        cascade_train_support=casc_train.support,
        cascade_test_accuracy=casc_test.accuracy,
        cascade_test_support=casc_test.support,
        levels=level_rows,
        base_test_confusion=metrics.confusion(b_te_y, b_te_p),
        cascade_test_confusion=metrics.confusion(c_te_y, c_te_p),
        base_test_trades=metrics.trade_report(b_te_y, b_te_p),
        cascade_test_trades=metrics.trade_report(c_te_y, c_te_p),
    )
    return result, cascades


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    experiment_id: int
    model_kind: str
    seed: int
    config_hash: str
    points: list[GridPointResult]


def run_experiment(
    experiment_id: int,
    cfg: dict,
    market_table: FeatureTable | None = None,
) -> ExperimentReport:
    """Run one protocol over the synthetic noise grid, or over a prepared
    (already binned) market feature table for ids 1-4."""
    if experiment_id not in EXPERIMENT_IDS:
        raise ConfigError(f"unknown experiment id {experiment_id}")
    seed = int(cfg["seed"])
    ccfg = cascade_config(cfg)
    fraction = float(cfg["experiment"]["train_fraction"])
    points: list[GridPointResult] = []

    if market_table is not None:
        if experiment_id in (5, 6):
            raise ConfigError("cross-noise experiments are synthetic-only")
        pairs = split(experiment_id, market_table, fraction)
        result, _ = run_grid_point("market", pairs, ccfg, seed)
        points.append(result)
    elif experiment_id in (5, 6):
        grid = noise_grid(cfg)
        clean = next((n for n in grid if n.sigma == 0 and n.sigma_p == 0), None)
        if clean is None:
            raise ConfigError("cross-noise experiments need the clean [0,0] level in the grid")
        eras = int(cfg["experiment"]["eras"])
        clean_table = synth_feature_table(clean, cfg, eras, seed)
        for noise in grid:
            if noise == clean:
                continue
            noisy_table = synth_feature_table(noise, cfg, eras, seed)
            if experiment_id == 5:
                pairs = split(5, clean_table, fraction, other=noisy_table)
            else:
                pairs = split(6, noisy_table, fraction, other=clean_table)
            result, _ = run_grid_point(noise.label(), pairs, ccfg, seed)
            points.append(result)
    else:
        eras = int(cfg["experiment"]["eras" if experiment_id in (1, 2) else "single_eras"])
        for noise in noise_grid(cfg):
            table = synth_feature_table(noise, cfg, eras, seed)
            pairs = split(experiment_id, table, fraction)
            result, _ = run_grid_point(noise.label(), pairs, ccfg, seed)
            points.append(result)

    return ExperimentReport(
        experiment_id=experiment_id,
        model_kind=ccfg.model.kind,
        seed=seed,
        config_hash=config_hash(cfg),
        points=points,
    )


# ---------------------------------------------------------------------------
# cross validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvCandidate:
    overrides: dict
    mean_accuracy: float
    n_params: int


@dataclass
class CvResult:
    chosen: dict
    candidates: list[CvCandidate]


def crossval(
    table: FeatureTable,
    base: ModelConfig,
    grid: dict[str, list],
    folds: int,
    seed: int,
) -> CvResult:
    """Era-respecting k-fold selection of model hyperparameters.

    Each grid point trains a single (ungated) model per fold; the point with
    the highest mean validation accuracy wins, ties broken by fewer
    parameters and then by lexicographic override order.
    """
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    if not grid:
        raise ConfigError("empty hyperparameter grid")
    for key in grid:
        if not hasattr(base, key):
            raise ConfigError(f"unknown hyperparameter {key!r}")
    eras = sorted(set(int(e) for e in table.era))
    if len(eras) < folds:
        raise TooFewRows(f"{len(eras)} eras cannot fill {folds} folds")
    fold_of_era = {era: i % folds for i, era in enumerate(eras)}
    fold_ids = np.asarray([fold_of_era[int(e)] for e in table.era])

    keys = sorted(grid)
    candidates: list[CvCandidate] = []
    for p_i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        overrides = dict(zip(keys, combo))
        mcfg = dataclasses.replace(base, **overrides)
        accs = []
        for fold in range(folds):
            tr = table.subset(fold_ids != fold)
            va = table.subset(fold_ids == fold)
            model = build_model(mcfg, len(table.names), seed=[seed, p_i, fold])
            train_model(
                model,
                tr.X.astype(float),
                tr.y,
                epochs=mcfg.resolved_epochs(),
                batch_size=mcfg.batch_size,
                learning_rate=mcfg.learning_rate,
                seed=[seed, p_i, fold],
            )
            pred = model.predict_proba(va.X.astype(float)).argmax(axis=1)
            accs.append(float(np.mean(pred == va.y)))
        n_params = build_model(mcfg, len(table.names), seed=0).params_vector().size
        candidates.append(CvCandidate(overrides=overrides, mean_accuracy=float(np.mean(accs)), n_params=n_params))

    def rank(c: CvCandidate):
        return (-c.mean_accuracy, c.n_params, repr(sorted(c.overrides.items())))

    best = min(candidates, key=rank)
    return CvResult(chosen=dict(best.overrides), candidates=candidates)
