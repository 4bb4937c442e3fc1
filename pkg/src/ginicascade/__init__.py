"""Impurity-gated cascades of soft decision trees and MLPs for abstaining
return prediction on OHLCV candles."""

__version__ = "0.1.0"

from .cascade import Cascade, CascadeConfig, Outcome, predict, train_cascade  # noqa: F401
from .models import Mlp, ModelConfig, SoftDecisionTree, build_model  # noqa: F401
from .synthgen import NOISE_GRID, NoiseSpec, build_dataset  # noqa: F401
