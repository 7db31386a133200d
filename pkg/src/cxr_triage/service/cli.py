"""Command-line entry points: serve, run, evaluate, make-fixture."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..backends.fixture import RecordingBackend
from ..metrics.records import evaluate_files
from ..metrics.report import render_report
from .config import load_config, make_backend
from .pipeline import dump_record, result_to_record, run_pipeline


def _input_files(paths: list[str]) -> list[Path]:
    """Expand directories and sort so batch output order is reproducible."""
    files: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(q for q in p.iterdir() if q.is_file()))
        else:
            files.append(p)
    return sorted(set(files))


def cmd_serve(args: argparse.Namespace) -> int:
    import dataclasses

    import uvicorn

    from .app import create_app

    cfg = load_config(args.config)
    overrides = {}
    if args.host:
        overrides["host"] = args.host
    if args.port:
        overrides["port"] = args.port
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="warning")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    backend = make_backend(cfg)
    files = _input_files(args.inputs)
    if not files:
        print("no input files", file=sys.stderr)
        return 2
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for path in files:
            result = run_pipeline(path.read_bytes(), backend, cfg)
            out.write(dump_record(result_to_record(result)) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    report = evaluate_files(args.pred, args.ref, by=args.by)
    sys.stdout.write(render_report(report, args.format))
    return 0


def cmd_make_fixture(args: argparse.Namespace) -> int:
    """Record a live backend's stage outputs into a fixture file."""
    cfg = load_config(args.config)
    recorder = RecordingBackend(make_backend(cfg))
    files = _input_files(args.inputs)
    for path in files:
        run_pipeline(path.read_bytes(), recorder, cfg)
    recorder.dump(args.out)
    print(f"recorded {len(recorder.records)} stage outputs from {len(files)} studies")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cxr-triage", description="Chest X-ray triage pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="batch-process DICOM files to NDJSON records")
    p.add_argument("inputs", nargs="+", help="DICOM files or directories")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="score predictions against a reference set")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--by", action="append", default=None, help="subgroup dimension (repeatable)")
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("make-fixture", help="record backend outputs for replay")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_make_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
