"""Thin command-line client for the service.

Without --server the CLI instantiates the service in-process and talks to it
over an ASGI transport, so every subcommand works standalone; with --server
the same requests go to a running instance (paths are then resolved on the
server's filesystem).

Exit codes: 0 success, 2 config error, 3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .config import load_config
from .errors import ConfigError
from .service.app import EXIT_CODES, create_app


def _call(server: str | None, path: str, payload: dict | None, method: str = "POST") -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.request(method, path, json=payload)

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://service", timeout=None) as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(go())


def _set_path(overrides: dict, dotted: str, value) -> None:
    node = overrides
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def _merged_config(args: argparse.Namespace, extra: dict[str, object]) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    for dotted, value in extra.items():
        if value is not None:
            _set_path(overrides, dotted, value)
    return load_config(args.config, overrides)


def _parse_noise(values: list[str]) -> list[list[float]]:
    grid = []
    for text in values:
        parts = text.split(",")
        if len(parts) != 2:
            raise ConfigError(f"--noise expects 'sigma,sigma_p', got {text!r}")
        grid.append([float(parts[0]), float(parts[1])])
    return grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ginicascade",
        description="Abstaining cascade classifiers on synthetic and market OHLCV data.",
    )
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--config", help="YAML/JSON config file overriding defaults")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic candle datasets per noise level")
    p.add_argument("--eras", type=int, help="eras per noise level")
    p.add_argument("--noise", action="append", metavar="S,SP", help="restrict the noise grid (repeatable)")

    p = sub.add_parser("ingest", help="normalize a market OHLCV CSV into candle series")
    p.add_argument("--csv", required=True)
    p.add_argument("--baseline", required=True, help="ticker,avg_volume CSV")
    p.add_argument("--reference-date", help="era-0 date, ISO format")
    p.add_argument("--name", default="market_candles.csv", help="output file name")

    p = sub.add_parser("features", help="compute binned features from a candle CSV")
    p.add_argument("--candles", required=True)
    p.add_argument("--reference", help="candle CSV to fit bin thresholds on")
    p.add_argument("--bins", help="existing bin thresholds CSV to apply")
    p.add_argument("--features-name", default="features.csv")
    p.add_argument("--bins-name", default="bins.csv")

    p = sub.add_parser("train", help="train a cascade (set cascade.levels to 1 for a single model)")
    p.add_argument("--features", required=True)
    p.add_argument("--model", choices=["ddt", "mlp"])
    p.add_argument("--levels", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--crossval", action="store_true", help="pick hyperparameters by k-fold CV first")
    p.add_argument("--name", default="cascade", help="checkpoint directory name under --out")

    p = sub.add_parser("eval", help="evaluate a saved cascade on a feature CSV")
    p.add_argument("--cascade", required=True)
    p.add_argument("--features", required=True)

    p = sub.add_parser("predict", help="predict-or-abstain on feature rows")
    p.add_argument("--cascade", required=True)
    p.add_argument("--row", action="append", metavar="B0,B1,...", help="comma-separated bins (repeatable)")
    p.add_argument("--rows-file", help="file with one comma-separated row per line")

    p = sub.add_parser("experiment", help="run one of the six experiment protocols")
    p.add_argument("--id", type=int, required=True, choices=range(1, 7))
    p.add_argument("--model", choices=["ddt", "mlp"])
    p.add_argument("--eras", type=int)
    p.add_argument("--format", default="both", choices=["csv", "json", "both"])
    p.add_argument("--market-features", help="run on this binned market feature CSV instead of synthetic data")

    p = sub.add_parser("report", help="re-emit tables from stored report.json files")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--format", default="csv", choices=["csv", "json", "both"])

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _request_for(args: argparse.Namespace) -> tuple[str, dict]:
    out = str(Path(args.out))
    if args.command == "synth":
        cfg = _merged_config(
            args,
            {
                "experiment.eras": args.eras,
                "synth.noise_grid": _parse_noise(args.noise) if args.noise else None,
            },
        )
        return "/synth", {"out_dir": out, "config": cfg}
    if args.command == "ingest":
        cfg = _merged_config(args, {"ingest.reference_date": args.reference_date})
        return "/ingest", {
            "csv_path": args.csv,
            "baseline_path": args.baseline,
            "out_path": str(Path(out) / args.name),
            "config": cfg,
        }
    if args.command == "features":
        cfg = _merged_config(args, {})
        return "/features", {
            "candles_path": args.candles,
            "reference_path": args.reference,
            "bins_path": args.bins,
            "out_features_path": str(Path(out) / args.features_name),
            "out_bins_path": str(Path(out) / args.bins_name),
            "config": cfg,
        }
    if args.command == "train":
        cfg = _merged_config(
            args,
            {
                "model.kind": args.model,
                "model.epochs": args.epochs,
                "model.depth": args.depth,
                "cascade.levels": args.levels,
            },
        )
        return "/train", {
            "features_path": args.features,
            "out_dir": str(Path(out) / args.name),
            "crossval": args.crossval,
            "config": cfg,
        }
    if args.command == "eval":
        return "/eval", {"cascade_path": args.cascade, "features_path": args.features}
    if args.command == "predict":
        rows: list[list[int]] = []
        for text in args.row or []:
            rows.append([int(v) for v in text.split(",")])
        if args.rows_file:
            for line in Path(args.rows_file).read_text().splitlines():
                if line.strip():
                    rows.append([int(v) for v in line.split(",")])
        if not rows:
            raise ConfigError("predict needs --row or --rows-file")
        return "/predict", {"cascade_path": args.cascade, "rows": rows}
    if args.command == "experiment":
        cfg = _merged_config(
            args,
            {"model.kind": args.model, "experiment.eras": args.eras},
        )
        return "/experiment", {
            "experiment_id": args.id,
            "out_dir": out,
            "fmt": args.format,
            "market_features_path": args.market_features,
            "config": cfg,
        }
    if args.command == "report":
        return "/report", {"runs": args.runs, "out_dir": out, "fmt": args.format}
    raise ConfigError(f"unknown command {args.command}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        path, payload = _request_for(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        resp = _call(args.server, path, payload)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 1

    try:
        body = resp.json()
    except json.JSONDecodeError:
        body = {"error": {"type": "internal", "message": resp.text}}

    if resp.status_code // 100 == 2:
        print(json.dumps(body, indent=2, sort_keys=True))
        return 0
    if isinstance(body, dict) and "error" in body:
        err = body["error"]
        print(f"error ({err.get('type')}): {err.get('message')}", file=sys.stderr)
        return EXIT_CODES.get(err.get("type"), 1)
    # pydantic request validation failures land here
    print(f"error: {json.dumps(body)}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
