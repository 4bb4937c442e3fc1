"""FastAPI service wrapping the core package.

Batch operations (synth/ingest/features/train/experiment/report) take and
return filesystem paths so large artifacts never travel over the wire;
/predict serves predict-or-abstain outcomes from cached cascades and is the
long-running, multi-client surface.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..cascade import evaluate, load_cascade, predict_batch, save_cascade, train_cascade
from ..config import cascade_config, config_hash, feature_spec, load_config, noise_grid, synth_config
from ..errors import (
    ConfigError,
    DataError,
    DivergedLoss,
    GiniCascadeError,
    IoError,
)
from ..candles import read_candles_csv, write_candles_csv
from ..features import (
    apply_bins,
    build_raw_table,
    fit_bins,
    read_bins_csv,
    read_feature_csv,
    write_bins_csv,
    write_feature_csv,
)
from ..harness import crossval, run_experiment
from ..ingest import load_market_dataset
from ..metrics import TradeReport, confusion, trade_report
from ..models import ModelConfig
from ..reports import emit_report, load_report_json, report_to_dict
from ..synthgen import build_dataset, write_dataset
from . import schemas

_ERROR_TYPES = [
    (ConfigError, "config", 400),
    (DivergedLoss, "training", 500),
    (IoError, "io", 422),
    (DataError, "data", 422),
    (GiniCascadeError, "internal", 500),
]

# maps error type -> CLI exit code
EXIT_CODES = {"config": 2, "data": 3, "io": 3, "training": 4, "internal": 1}


def _error_response(exc: Exception) -> JSONResponse:
    for klass, kind, status in _ERROR_TYPES:
        if isinstance(exc, klass):
            return JSONResponse(
                status_code=status,
                content={"error": {"type": kind, "message": str(exc)}},
            )
    return JSONResponse(status_code=500, content={"error": {"type": "internal", "message": str(exc)}})


def _trade_model(t: TradeReport) -> schemas.TradeReportModel:
    drar = t.drar
    if drar is not None and drar == float("inf"):
        drar = "inf"
    return schemas.TradeReportModel(
        gain=t.gain,
        loss=t.loss,
        trades=t.trades,
        average_utility=t.average_utility,
        drar=drar,
        traded_sharpe=t.traded_sharpe,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="ginicascade", version=__version__)
    app.state.cascade_cache = {}

    @app.exception_handler(GiniCascadeError)
    async def on_package_error(request: Request, exc: GiniCascadeError):
        return _error_response(exc)

    @app.exception_handler(FileNotFoundError)
    async def on_missing_file(request: Request, exc: FileNotFoundError):
        return JSONResponse(
            status_code=422, content={"error": {"type": "data", "message": str(exc)}}
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        cfg = load_config(None, req.config)
        eras = int(cfg["experiment"]["eras"])
        seed = int(cfg["seed"])
        sc = synth_config(cfg)
        files = []
        for noise in noise_grid(cfg):
            series = build_dataset(noise, eras, seed, sc)
            path = write_dataset(series, noise, req.out_dir)
            files.append(
                schemas.SynthFile(path=str(path), sigma=noise.sigma, sigma_p=noise.sigma_p, eras=eras)
            )
        return schemas.SynthResponse(files=files, config_hash=config_hash(cfg))

    @app.post("/ingest", response_model=schemas.IngestResponse)
    def ingest(req: schemas.IngestRequest):
        cfg = load_config(None, req.config)
        reference_date = dt.date.fromisoformat(cfg["ingest"]["reference_date"])
        series = load_market_dataset(
            req.csv_path,
            req.baseline_path,
            reference_date,
            expected_candles=int(cfg["ingest"]["expected_candles"]),
        )
        write_candles_csv(series, req.out_path)
        return schemas.IngestResponse(out_path=req.out_path, days=len(series))

    @app.post("/features", response_model=schemas.FeaturesResponse)
    def features(req: schemas.FeaturesRequest):
        cfg = load_config(None, req.config)
        fs = feature_spec(cfg)
        raw = build_raw_table(read_candles_csv(req.candles_path), fs)
        if req.bins_path:
            thresholds = read_bins_csv(req.bins_path)
            bins_out = req.bins_path
        elif req.reference_path:
            thresholds = fit_bins(build_raw_table(read_candles_csv(req.reference_path), fs))
            bins_out = req.out_bins_path or str(Path(req.out_features_path).with_suffix(".bins.csv"))
            write_bins_csv(thresholds, bins_out)
        else:
            raise ConfigError("need reference_path (fit bins) or bins_path (apply bins)")
        table = apply_bins(raw, thresholds)
        write_feature_csv(table, req.out_features_path)
        return schemas.FeaturesResponse(
            features_path=req.out_features_path,
            bins_path=bins_out,
            rows=len(table),
            n_features=len(table.names),
        )

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        cfg = load_config(None, req.config)
        table = read_feature_csv(req.features_path)
        chosen = None
        ccfg = cascade_config(cfg)
        if req.crossval:
            result = crossval(
                table,
                ccfg.model,
                {k: list(v) for k, v in cfg["cv"]["grid"].items()},
                folds=int(cfg["cv"]["folds"]),
                seed=int(cfg["seed"]),
            )
            chosen = result.chosen
            ccfg = dataclasses.replace(ccfg, model=dataclasses.replace(ccfg.model, **chosen))
        cascade = train_cascade(ccfg, table, seed=int(cfg["seed"]))
        manifest = save_cascade(
            cascade, req.out_dir, seed=int(cfg["seed"]), config_hash=config_hash(cfg)
        )
        return schemas.TrainResponse(
            manifest_path=str(manifest),
            levels=cascade.n_levels,
            diagnostics=[
                schemas.LevelDiagnosticsModel(
                    level=d.level,
                    train_rows=d.train_rows,
                    answered=d.answered,
                    correct=d.correct,
                    accuracy=d.accuracy,
                    unpruned_fraction=d.unpruned_fraction,
                )
                for d in cascade.diagnostics
            ],
            chosen_hyperparameters=chosen,
            config_hash=config_hash(cfg),
        )

    def _cached_cascade(path: str):
        cache = app.state.cascade_cache
        if path not in cache:
            cache[path] = load_cascade(path)
        return cache[path]

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_cascade(req: schemas.EvalRequest):
        cascade = _cached_cascade(req.cascade_path)
        table = read_feature_csv(req.features_path)
        if table.names != cascade.feature_names:
            raise DataError("feature columns do not match the cascade's training features")
        ev = evaluate(cascade, table)
        X = table.X.astype(float)
        base_pred = cascade.models[0].predict_proba(X).argmax(axis=1)
        return schemas.EvalResponse(
            n_rows=ev.n_rows,
            base_accuracy=float(np.mean(base_pred == table.y)) if len(table) else None,
            accuracy=ev.accuracy,
            support=ev.support,
            levels=[
                schemas.LevelEvalModel(
                    level=lv.level,
                    reached=lv.reached,
                    answered=lv.answered,
                    correct=lv.correct,
                    accuracy=lv.accuracy,
                    unpruned_fraction=lv.unpruned_fraction,
                )
                for lv in ev.levels
            ],
            confusion=confusion(table.y, ev.outcomes.classes).tolist(),
            trades=_trade_model(trade_report(table.y, ev.outcomes.classes)),
            base_trades=_trade_model(trade_report(table.y, base_pred)),
        )

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict(req: schemas.PredictRequest):
        cascade = _cached_cascade(req.cascade_path)
        width = len(cascade.feature_names)
        rows = np.asarray(req.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != width:
            raise DataError(f"each row must have {width} features")
        out = predict_batch(cascade, rows)
        return schemas.PredictResponse(
            outcomes=[
                schemas.OutcomeModel(
                    predicted_class=o.predicted_class,
                    level=o.level,
                    distribution=list(o.distribution) if o.distribution else None,
                )
                for o in (out.outcome(i) for i in range(len(out)))
            ]
        )

    @app.post("/experiment", response_model=schemas.ExperimentResponse)
    def experiment(req: schemas.ExperimentRequest):
        cfg = load_config(None, req.config)
        market = read_feature_csv(req.market_features_path) if req.market_features_path else None
        report = run_experiment(req.experiment_id, cfg, market_table=market)
        files = emit_report([report], req.fmt, req.out_dir)
        return schemas.ExperimentResponse(
            report=report_to_dict(report),
            files=[str(f) for f in files],
            config_hash=report.config_hash,
        )

    @app.post("/report", response_model=schemas.ReportResponse)
    def report(req: schemas.ReportRequest):
        reports = [r for p in req.runs for r in load_report_json(p)]
        files = emit_report(reports, req.fmt, req.out_dir)
        return schemas.ReportResponse(files=[str(f) for f in files])

    return app
