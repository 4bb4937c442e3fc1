"""Classification and trading metrics over predict-or-abstain outcomes.

Trading metrics only look at actionable predictions (class 0 = short,
class 4 = long). Each actionable prediction earns a utility from the fixed
table: predicting 0 pays 2 - truth, predicting 4 pays truth - 2, so a
ground truth of 2 is always worth zero and the table is antisymmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import N_CLASSES

ABSTAIN = -1

SHORT_CLASS = 0
LONG_CLASS = 4


def utility(pred: int, truth: int) -> int:
    """Utility of one actionable prediction; raises for classes 1-3."""
    if pred == SHORT_CLASS:
        return 2 - truth
    if pred == LONG_CLASS:
        return truth - 2
    raise ValueError(f"class {pred} is not actionable")


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    """5x5 counts with rows = ground truth, columns = prediction.
    Abstentions (y_pred == ABSTAIN) are excluded."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    mask = y_pred != ABSTAIN
    matrix = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    np.add.at(matrix, (y_true[mask], y_pred[mask]), 1)
    return matrix


@dataclass(frozen=True)
class AccuracySupport:
    accuracy: float | None  # None when nothing was predicted
    support: float


def accuracy_support(y_true: np.ndarray, y_pred: np.ndarray) -> AccuracySupport:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    total = y_true.size
    mask = y_pred != ABSTAIN
    predicted = int(mask.sum())
    if predicted == 0:
        return AccuracySupport(accuracy=None, support=0.0)
    correct = int((y_pred[mask] == y_true[mask]).sum())
    return AccuracySupport(accuracy=correct / predicted, support=predicted / total if total else 0.0)


@dataclass(frozen=True)
class TradeReport:
    gain: float  # sum of positive utilities
    loss: float  # absolute sum of negative utilities
    trades: int  # number of class-0/4 predictions
    average_utility: float | None  # (gain - loss) / trades
    drar: float | None  # (gain - loss) / loss; +inf when loss == 0 and gain > 0
    traded_sharpe: float | None  # average utility / population std of utilities


def trade_report(y_true: np.ndarray, y_pred: np.ndarray) -> TradeReport:
    """Metrics over actionable predictions only. Predictions in classes 1-3
    and abstentions never affect the report. With no trades every ratio is
    absent (None); DRAR with zero loss is reported as +inf."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    mask = (y_pred == SHORT_CLASS) | (y_pred == LONG_CLASS)
    trades = int(mask.sum())
    if trades == 0:
        return TradeReport(0.0, 0.0, 0, None, None, None)
    utils = np.where(y_pred[mask] == SHORT_CLASS, 2 - y_true[mask], y_true[mask] - 2).astype(float)
    gain = float(utils[utils > 0].sum())
    loss = float(-utils[utils < 0].sum())
    average = (gain - loss) / trades
    if loss > 0:
        drar = (gain - loss) / loss
    else:
        drar = math.inf if gain > 0 else None
    std = float(utils.std())  # population std; defined even for a single trade
    sharpe = average / std if std > 0 else None
    return TradeReport(
        gain=gain,
        loss=loss,
        trades=trades,
        average_utility=average,
        drar=drar,
        traded_sharpe=sharpe,
    )
