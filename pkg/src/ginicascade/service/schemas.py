"""Request/response models for the service endpoints.

Every mutating request carries ``config``: overrides over the package
defaults (the CLI sends its fully merged config here). Paths are resolved on
the service host's filesystem.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    type: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorBody


class SynthRequest(BaseModel):
    out_dir: str
    config: dict = Field(default_factory=dict)


class SynthFile(BaseModel):
    path: str
    sigma: float
    sigma_p: float
    eras: int


class SynthResponse(BaseModel):
    files: list[SynthFile]
    config_hash: str


class IngestRequest(BaseModel):
    csv_path: str
    baseline_path: str
    out_path: str
    config: dict = Field(default_factory=dict)


class IngestResponse(BaseModel):
    out_path: str
    days: int


class FeaturesRequest(BaseModel):
    candles_path: str
    out_features_path: str
    # exactly one of: reference candles to fit bins on, or existing bins
    reference_path: str | None = None
    bins_path: str | None = None
    out_bins_path: str | None = None
    config: dict = Field(default_factory=dict)


class FeaturesResponse(BaseModel):
    features_path: str
    bins_path: str | None
    rows: int
    n_features: int


class TrainRequest(BaseModel):
    features_path: str
    out_dir: str
    crossval: bool = False
    config: dict = Field(default_factory=dict)


class LevelDiagnosticsModel(BaseModel):
    level: int
    train_rows: int
    answered: int
    correct: int
    accuracy: float | None
    unpruned_fraction: float


class TrainResponse(BaseModel):
    manifest_path: str
    levels: int
    diagnostics: list[LevelDiagnosticsModel]
    chosen_hyperparameters: dict | None
    config_hash: str


class EvalRequest(BaseModel):
    cascade_path: str
    features_path: str


class LevelEvalModel(BaseModel):
    level: int
    reached: int
    answered: int
    correct: int
    accuracy: float | None
    unpruned_fraction: float


class TradeReportModel(BaseModel):
    gain: float
    loss: float
    trades: int
    average_utility: float | None
    # "inf" when loss is zero but gain is not
    drar: float | str | None
    traded_sharpe: float | None


class EvalResponse(BaseModel):
    n_rows: int
    base_accuracy: float | None
    accuracy: float | None
    support: float
    levels: list[LevelEvalModel]
    confusion: list[list[int]]
    trades: TradeReportModel
    base_trades: TradeReportModel


class PredictRequest(BaseModel):
    cascade_path: str
    rows: list[list[int]]


class OutcomeModel(BaseModel):
    predicted_class: int | None
    level: int | None
    distribution: list[float] | None


class PredictResponse(BaseModel):
    outcomes: list[OutcomeModel]


class ExperimentRequest(BaseModel):
    experiment_id: int
    out_dir: str
    fmt: str = "both"
    market_features_path: str | None = None
    config: dict = Field(default_factory=dict)


class ExperimentResponse(BaseModel):
    report: dict
    files: list[str]
    config_hash: str


class ReportRequest(BaseModel):
    runs: list[str]
    out_dir: str
    fmt: str = "csv"


class ReportResponse(BaseModel):
    files: list[str]
