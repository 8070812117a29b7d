"""Command-line front door: validate, simulate, compare, serve.

All commands are deterministic given (config, seeds): batch runs use a null
clock so durations serialize as 0.0 and repeated runs are byte-identical.
Pass --timing to record real wall-clock durations instead (at the cost of
reproducible output files).  Exit codes: 0 ok, 1 runtime failure, 2 config
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import engine
from .config import ConfigError, condition_documents, load_document, session_config_from_document, validate_document

log = logging.getLogger("polard")


def default_data_dir() -> Path:
    return Path(os.environ.get("POLARD_DATA_DIR", "polard_data"))


def _load(path: str) -> dict:
    try:
        return load_document(path)
    except FileNotFoundError:
        print(f"error: config file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    except json.JSONDecodeError as exc:
        print(f"error: {path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}", file=sys.stderr)
        raise SystemExit(2)


def cmd_validate(args: argparse.Namespace) -> int:
    doc = _load(args.config)
    result = validate_document(doc)
    for w in result.warnings:
        print(f"warning: {w}")
    if not result.ok:
        for e in result.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"{args.config}: ok")
    return 0


def _seeds(args: argparse.Namespace, doc: dict) -> list[int]:
    if args.seed:
        return [int(s) for s in args.seed]
    if doc.get("seeds"):
        return [int(s) for s in doc["seeds"]]
    return [0]


def _out_dir(args: argparse.Namespace, doc: dict) -> Path:
    out = Path(args.out) if args.out else Path(doc.get("output_dir", "polard_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args: argparse.Namespace) -> int:
    doc = _load(args.config)
    seeds = _seeds(args, doc)
    out = _out_dir(args, doc)
    clock = time.perf_counter if args.timing else None
    for seed in seeds:
        try:
            config = session_config_from_document(doc, seed=seed)
        except ConfigError as exc:
            for e in exc.errors:
                print(f"error: {e}", file=sys.stderr)
            return 2
        if config.source != "synthetic":
            print("error: cmd simulate requires source = 'synthetic'", file=sys.stderr)
            return 2
        state, report = engine.run_simulation(config, clock=clock)
        suffix = f"_seed{seed}" if len(seeds) > 1 else ""
        (out / f"transcript{suffix}.jsonl").write_text(engine.transcript_lines(state.transcript))
        (out / f"metrics{suffix}.csv").write_text(report.csv_text())
        snapshot = state.posterior.to_json_dict(include_covariance=args.full_cov)
        (out / f"posterior{suffix}.json").write_text(
            json.dumps(snapshot, sort_keys=True, indent=2) + "\n")
        log.info("seed %d: final optimal_action_error=%.6g",
                 seed, report.optimal_action_error[-1])
    print(f"wrote {len(seeds)} run(s) to {out}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    doc = _load(args.config)
    seeds = _seeds(args, doc)
    out = _out_dir(args, doc)
    clock = time.perf_counter if args.timing else None
    conditions = []
    for label, cond_doc in condition_documents(doc):
        try:
            conditions.append((label, session_config_from_document(cond_doc)))
        except ConfigError as exc:
            for e in exc.errors:
                print(f"error: condition {label!r}: {e}", file=sys.stderr)
            return 2
    rows = engine.compare_runs(conditions, seeds, max_workers=args.workers, clock=clock)
    (out / "comparison.csv").write_text(engine.comparison_csv(rows))
    print(f"wrote comparison of {len(conditions)} condition(s) x {len(seeds)} seed(s) to {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    doc = _load(args.config) if args.config else None
    data_dir = Path(args.out) if args.out else default_data_dir()
    ui_dir = os.environ.get("POLARD_UI_DIR")
    if ui_dir is None and Path("frontend/index.html").exists():
        ui_dir = "frontend"
    app = create_app(data_dir=data_dir, default_document=doc, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level.lower())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polard",
        description="Preference-based learning over discretized parameter spaces.")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("config")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("simulate", help="run closed-loop synthetic sessions")
    p.add_argument("config")
    p.add_argument("--seed", action="append", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--timing", action="store_true",
                   help="record real wall-clock durations (breaks byte-reproducibility)")
    p.add_argument("--full-cov", action="store_true",
                   help="include the full covariance in the posterior snapshot")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("compare", help="run a condition matrix and export mean +- SE")
    p.add_argument("config")
    p.add_argument("--seed", action="append", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("serve", help="serve the live session API (and UI if built)")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--out", default=None, help="data directory for session transcripts")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level)
    try:
        return args.fn(args)
    except SystemExit:
        raise
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level CLI boundary
        log.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
