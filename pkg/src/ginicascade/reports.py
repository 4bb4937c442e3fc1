"""Report emission for experiment runs.

CSV values use repr() for floats and the strings "" (absent) / "inf", so a
CSV row and its JSON counterpart carry identical values and reruns with the
same seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, IoError
from .harness import ExperimentReport, GridPointResult, LevelRow
from .metrics import TradeReport

SUMMARY_HEADER = [
    "experiment",
    "model",
    "label",
    "n_train_rows",
    "n_test_rows",
    "base_train_acc",
    "base_test_acc",
    "cascade_train_acc",
    "cascade_test_acc",
    "train_support",
    "test_support",
    "config_hash",
    "seed",
]

LEVELS_HEADER = [
    "experiment",
    "label",
    "level",
    "train_reached",
    "train_answered",
    "train_correct",
    "train_acc",
    "train_unpruned",
    "test_reached",
    "test_answered",
    "test_correct",
    "test_acc",
    "test_unpruned",
]

TRADES_HEADER = [
    "experiment",
    "label",
    "variant",
    "gain",
    "loss",
    "trades",
    "average_utility",
    "drar",
    "traded_sharpe",
]

CONFUSION_HEADER = ["experiment", "label", "variant", "truth", "p0", "p1", "p2", "p3", "p4"]


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _trade_dict(t: TradeReport) -> dict:
    return {
        "gain": t.gain,
        "loss": t.loss,
        "trades": t.trades,
        "average_utility": t.average_utility,
        "drar": _jsonable(t.drar),
        "traded_sharpe": t.traded_sharpe,
    }


def _trade_from_dict(d: dict) -> TradeReport:
    drar = d["drar"]
    if drar == "inf":
        drar = math.inf
    elif drar == "-inf":
        drar = -math.inf
    return TradeReport(
        gain=d["gain"],
        loss=d["loss"],
        trades=d["trades"],
        average_utility=d["average_utility"],
        drar=drar,
        traded_sharpe=d["traded_sharpe"],
    )


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "experiment_id": report.experiment_id,
        "model_kind": report.model_kind,
        "seed": report.seed,
        "config_hash": report.config_hash,
        "points": [
            {
                "label": p.label,
                "n_train_rows": p.n_train_rows,
                "n_test_rows": p.n_test_rows,
                "base_train_accuracy": p.base_train_accuracy,
                "base_test_accuracy": p.base_test_accuracy,
                "cascade_train_accuracy": p.cascade_train_accuracy,
                "cascade_train_support": p.cascade_train_support,
                "cascade_test_accuracy": p.cascade_test_accuracy,
                "cascade_test_support": p.cascade_test_support,
                "levels": [
                    {
                        "level": lv.level,
                        "train_reached": lv.train_reached,
                        "train_answered": lv.train_answered,
                        "train_correct": lv.train_correct,
                        "test_reached": lv.test_reached,
                        "test_answered": lv.test_answered,
                        "test_correct": lv.test_correct,
                    }
                    for lv in p.levels
                ],
                "base_test_confusion": p.base_test_confusion.tolist(),
                "cascade_test_confusion": p.cascade_test_confusion.tolist(),
                "base_test_trades": _trade_dict(p.base_test_trades),
                "cascade_test_trades": _trade_dict(p.cascade_test_trades),
            }
            for p in report.points
        ],
    }


def report_from_dict(d: dict) -> ExperimentReport:
    points = []
    for p in d["points"]:
        points.append(
            GridPointResult(
                label=p["label"],
                n_train_rows=p["n_train_rows"],
                n_test_rows=p["n_test_rows"],
                base_train_accuracy=p["base_train_accuracy"],
                base_test_accuracy=p["base_test_accuracy"],
                cascade_train_accuracy=p["cascade_train_accuracy"],
                cascade_train_support=p["cascade_train_support"],
                cascade_test_accuracy=p["cascade_test_accuracy"],
                cascade_test_support=p["cascade_test_support"],
                levels=[LevelRow(**lv) for lv in p["levels"]],
                base_test_confusion=np.asarray(p["base_test_confusion"], dtype=int),
                cascade_test_confusion=np.asarray(p["cascade_test_confusion"], dtype=int),
                base_test_trades=_trade_from_dict(p["base_test_trades"]),
                cascade_test_trades=_trade_from_dict(p["cascade_test_trades"]),
            )
        )
    return ExperimentReport(
        experiment_id=d["experiment_id"],
        model_kind=d["model_kind"],
        seed=d["seed"],
        config_hash=d["config_hash"],
        points=points,
    )


def load_report_json(path: str | Path) -> list[ExperimentReport]:
    """Load a report.json file (one report or a list of them)."""
    try:
        with open(path) as f:
            data = json.load(f)
        if isinstance(data, dict):
            data = [data]
        return [report_from_dict(d) for d in data]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise IoError(f"cannot load report {path}: {exc}")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}")


def emit_report(
    reports: list[ExperimentReport],
    fmt: str,
    out_dir: str | Path,
) -> list[Path]:
    """Write summary / per-level / trade / confusion tables plus plot-ready
    accuracy-vs-noise and support-vs-noise series. ``fmt`` is "csv", "json"
    or "both"."""
    if fmt not in ("csv", "json", "both"):
        raise ConfigError(f"unknown report format {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if fmt in ("csv", "both"):
        summary_rows = []
        for rep in reports:
            for p in rep.points:
                summary_rows.append(
                    [
                        rep.experiment_id,
                        rep.model_kind,
                        p.label,
                        p.n_train_rows,
                        p.n_test_rows,
                        p.base_train_accuracy,
                        p.base_test_accuracy,
                        p.cascade_train_accuracy,
                        p.cascade_test_accuracy,
                        p.cascade_train_support,
                        p.cascade_test_support,
                        rep.config_hash,
                        rep.seed,
                    ]
                )
        path = out_dir / "summary.csv"
        _write_csv(path, SUMMARY_HEADER, summary_rows)
        written.append(path)

        for rep in reports:
            tag = f"experiment{rep.experiment_id}"
            level_rows = []
            trade_rows = []
            conf_rows = []
            acc_rows = []
            sup_rows = []
            for p in rep.points:
                for lv in p.levels:
                    level_rows.append(
                        [
                            rep.experiment_id,
                            p.label,
                            lv.level,
                            lv.train_reached,
                            lv.train_answered,
                            lv.train_correct,
                            lv.train_accuracy,
                            lv.train_unpruned,
                            lv.test_reached,
                            lv.test_answered,
                            lv.test_correct,
                            lv.test_accuracy,
                            lv.test_unpruned,
                        ]
                    )
                for variant, trade in (("base", p.base_test_trades), ("cascaded", p.cascade_test_trades)):
                    trade_rows.append(
                        [
                            rep.experiment_id,
                            p.label,
                            variant,
                            trade.gain,
                            trade.loss,
                            trade.trades,
                            trade.average_utility,
                            trade.drar,
                            trade.traded_sharpe,
                        ]
                    )
                for variant, matrix in (
                    ("base", p.base_test_confusion),
                    ("cascaded", p.cascade_test_confusion),
                ):
                    for truth in range(matrix.shape[0]):
                        conf_rows.append(
                            [rep.experiment_id, p.label, variant, truth] + list(matrix[truth])
                        )
                acc_rows.append([p.label, p.base_test_accuracy, p.cascade_test_accuracy])
                sup_rows.append([p.label, p.cascade_test_support])
            for name, header, rows in (
                (f"{tag}_levels.csv", LEVELS_HEADER, level_rows),
                (f"{tag}_trades.csv", TRADES_HEADER, trade_rows),
                (f"{tag}_confusions.csv", CONFUSION_HEADER, conf_rows),
                (f"{tag}_accuracy_vs_noise.csv", ["label", "base_test_acc", "cascade_test_acc"], acc_rows),
                (f"{tag}_support_vs_noise.csv", ["label", "cascade_test_support"], sup_rows),
            ):
                path = out_dir / name
                _write_csv(path, header, rows)
                written.append(path)

    if fmt in ("json", "both"):
        path = out_dir / "report.json"
        try:
            with open(path, "w") as f:
                json.dump([report_to_dict(r) for r in reports], f, indent=1, sort_keys=True)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}")
        written.append(path)

    return written
