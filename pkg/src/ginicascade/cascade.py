"""Impurity-gated cascades.

Training: fit a fresh model per level; points whose predicted distribution is
too impure (gini > max_impurity) are pruned and become the next level's
training set. Inference: each point is answered by the first level whose
prediction is confident enough, or abstained on if no level qualifies. The
same gini > max_impurity rule gates both phases so train-time and test-time
pruning agree on boundary values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyTrainSet, IoError
from .features import FeatureTable
from .models import Model, ModelConfig, build_model, load_model, save_model, train_model
from .numerics import gini_impurity

ABSTAIN = -1


@dataclass(frozen=True)
class CascadeConfig:
    max_impurity: float = 0.5
    levels: int = 3
    min_level_accuracy: float | None = None
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if not (0.0 < self.max_impurity < 1.0):
            raise ConfigError("max_impurity must be in (0, 1)")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")


@dataclass
class LevelDiagnostics:
    """Training-time stats for one level, on the slice of data it saw."""

    level: int
    train_rows: int
    answered: int
    correct: int
    final_loss: float

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.answered if self.answered else None

    @property
    def unpruned_fraction(self) -> float:
        return self.answered / self.train_rows if self.train_rows else 0.0


@dataclass
class Cascade:
    config: CascadeConfig
    models: list[Model]
    diagnostics: list[LevelDiagnostics]
    feature_names: list[str]

    @property
    def n_levels(self) -> int:
        return len(self.models)


def _seed_parts(seed) -> list[int]:
    return [int(s) for s in seed] if isinstance(seed, (list, tuple)) else [int(seed)]


def train_cascade(config: CascadeConfig, table: FeatureTable, seed: int) -> Cascade:
    """One model per level on recursively pruned data. Stops early when no
    points are pruned onward, or (if configured) when a level's accuracy on
    its confident subset falls below min_level_accuracy."""
    if len(table) == 0:
        raise EmptyTrainSet("cascade training needs at least one row")
    X = table.X.astype(float)
    y = table.y
    current = np.arange(len(table))
    models: list[Model] = []
    diags: list[LevelDiagnostics] = []
    for level in range(1, config.levels + 1):
        if current.size == 0:
            break
        level_seed = [*_seed_parts(seed), level]
        model = build_model(config.model, len(table.names), seed=level_seed)
        trace = train_model(
            model,
            X[current],
            y[current],
            epochs=config.model.resolved_epochs(),
            batch_size=config.model.batch_size,
            learning_rate=config.model.learning_rate,
            seed=level_seed,
        )
        probs = model.predict_proba(X[current])
        confident = gini_impurity(probs) <= config.max_impurity
        answered = int(confident.sum())
        correct = int((probs.argmax(axis=1)[confident] == y[current][confident]).sum())
        diag = LevelDiagnostics(
            level=level,
            train_rows=int(current.size),
            answered=answered,
            correct=correct,
            final_loss=trace[-1] if trace else float("nan"),
        )
        models.append(model)
        diags.append(diag)
        if (
            config.min_level_accuracy is not None
            and diag.accuracy is not None
            and diag.accuracy < config.min_level_accuracy
        ):
            break
        current = current[~confident]
    return Cascade(config=config, models=models, diagnostics=diags, feature_names=list(table.names))


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Outcome:
    """Either a prediction (class + distribution + answering level) or an
    abstention (all fields None)."""

    predicted_class: int | None
    level: int | None
    distribution: tuple[float, ...] | None

    @property
    def abstained(self) -> bool:
        return self.predicted_class is None


@dataclass
class BatchOutcomes:
    """Vectorized outcomes: class ABSTAIN (-1) / level 0 mark abstentions;
    distributions of abstained rows are NaN."""

    classes: np.ndarray  # (n,) int
    levels: np.ndarray  # (n,) int, 1-based
    distributions: np.ndarray  # (n, C)

    def __len__(self) -> int:
        return int(self.classes.size)

    @property
    def predicted_mask(self) -> np.ndarray:
        return self.classes != ABSTAIN

    def outcome(self, i: int) -> Outcome:
        if self.classes[i] == ABSTAIN:
            return Outcome(None, None, None)
        return Outcome(
            predicted_class=int(self.classes[i]),
            level=int(self.levels[i]),
            distribution=tuple(float(v) for v in self.distributions[i]),
        )


def predict_batch(cascade: Cascade, X: np.ndarray) -> BatchOutcomes:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    n_classes = 5
    classes = np.full(n, ABSTAIN, dtype=int)
    levels = np.zeros(n, dtype=int)
    dists = np.full((n, n_classes), np.nan)
    remaining = np.arange(n)
    for k, model in enumerate(cascade.models, start=1):
        if remaining.size == 0:
            break
        probs = model.predict_proba(X[remaining])
        confident = gini_impurity(probs) <= cascade.config.max_impurity
        hit = remaining[confident]
        classes[hit] = probs[confident].argmax(axis=1)
        levels[hit] = k
        dists[hit] = probs[confident]
        remaining = remaining[~confident]
    return BatchOutcomes(classes=classes, levels=levels, distributions=dists)


def predict(cascade: Cascade, x: np.ndarray) -> Outcome:
    return predict_batch(cascade, np.atleast_2d(np.asarray(x, dtype=float))).outcome(0)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelEvaluation:
    level: int
    reached: int
    answered: int
    correct: int

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.answered if self.answered else None

    @property
    def unpruned_fraction(self) -> float:
        return self.answered / self.reached if self.reached else 0.0


@dataclass
class CascadeEvaluation:
    n_rows: int
    levels: list[LevelEvaluation]
    outcomes: BatchOutcomes

    @property
    def answered(self) -> int:
        return sum(lv.answered for lv in self.levels)

    @property
    def correct(self) -> int:
        return sum(lv.correct for lv in self.levels)

    @property
    def support(self) -> float:
        return self.answered / self.n_rows if self.n_rows else 0.0

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.answered if self.answered else None


def evaluate(cascade: Cascade, table: FeatureTable) -> CascadeEvaluation:
    """Accuracy over answered points only; per-level stats are relative to the
    points that reached that level (mirrors the cascade's data flow)."""
    out = predict_batch(cascade, table.X.astype(float))
    n = len(table)
    stats: list[LevelEvaluation] = []
    reached = n
    for k in range(1, cascade.n_levels + 1):
        at_k = out.levels == k
        answered = int(at_k.sum())
        correct = int((out.classes[at_k] == table.y[at_k]).sum())
        stats.append(LevelEvaluation(level=k, reached=reached, answered=answered, correct=correct))
        reached -= answered
    return CascadeEvaluation(n_rows=n, levels=stats, outcomes=out)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

MANIFEST_NAME = "cascade.json"


def save_cascade(cascade: Cascade, out_dir: str | Path, seed: int | None = None, config_hash: str | None = None) -> Path:
    """Manifest + one checkpoint file per level."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    level_files = []
    for k, model in enumerate(cascade.models, start=1):
        name = f"level{k}.json"
        save_model(model, out_dir / name, seed=seed, config_hash=config_hash)
        level_files.append(name)
    cfg = cascade.config
    manifest = {
        "max_impurity": cfg.max_impurity,
        "levels": cfg.levels,
        "min_level_accuracy": cfg.min_level_accuracy,
        "feature_names": cascade.feature_names,
        "level_files": level_files,
        "seed": seed,
        "config_hash": config_hash,
        "diagnostics": [
            {
                "level": d.level,
                "train_rows": d.train_rows,
                "answered": d.answered,
                "correct": d.correct,
                "final_loss": d.final_loss,
            }
            for d in cascade.diagnostics
        ],
    }
    path = out_dir / MANIFEST_NAME
    with open(path, "w") as f:
        json.dump(manifest, f, indent=1)
    return path


def load_cascade(path: str | Path) -> Cascade:
    """Accepts the manifest path or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        with open(path) as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"cannot load cascade from {path}: {exc}")
    models = [load_model(path.parent / name) for name in manifest["level_files"]]
    if not models:
        raise IoError(f"cascade manifest {path} references no models")
    config = CascadeConfig(
        max_impurity=manifest["max_impurity"],
        levels=manifest["levels"],
        min_level_accuracy=manifest["min_level_accuracy"],
        model=models[0].config,
    )
    diags = [
        LevelDiagnostics(
            level=d["level"],
            train_rows=d["train_rows"],
            answered=d["answered"],
            correct=d["correct"],
            final_loss=d["final_loss"],
        )
        for d in manifest.get("diagnostics", [])
    ]
    return Cascade(config=config, models=models, diagnostics=diags, feature_names=manifest["feature_names"])
