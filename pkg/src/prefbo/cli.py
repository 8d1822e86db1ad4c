"""Command-line entry points: benchmark runs, summaries, noise calibration,
case-study export, and the live session service.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .benchmarks import calibrate_sigma, get_function, registry_names
from .experiment import (
    ExperimentConfig,
    export_case_study,
    load_run,
    run_many,
    summarize,
    summary_to_csv,
)
from .laplace import FitError
from .stats import FactorizationError, QuadratureError, RandomSource

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parse_seeds(spec: str) -> list[int]:
    """'3', '0..9' (inclusive), or '1,4,7'."""
    if ".." in spec:
        a, b = spec.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {spec!r}")
        return list(range(lo, hi + 1))
    if "," in spec:
        return [int(s) for s in spec.split(",") if s.strip()]
    return [int(spec)]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefbo")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run benchmark experiments")
    run.add_argument("--function", required=True, choices=registry_names())
    run.add_argument("--method", required=True, choices=["kg", "eubo", "logei", "random"])
    run.add_argument("--noise", default="low", choices=["low", "high", "det"])
    run.add_argument("--seeds", required=True, help="N, A..B, or comma list")
    run.add_argument("--iters", type=int, default=100)
    run.add_argument("--init-pairs", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", required=True, help="output directory for JSONL records")

    summ = sub.add_parser("summarize", help="gap quantiles over saved runs")
    summ.add_argument("--in", dest="in_dir", required=True)
    summ.add_argument("--out", required=True, help="output CSV path")

    cal = sub.add_parser("calibrate", help="calibrate comparison noise")
    cal.add_argument("--function", required=True, choices=registry_names())
    cal.add_argument("--target", type=float, required=True)
    cal.add_argument("--seed", type=int, default=0)

    case = sub.add_parser("case-study", help="export a 2-D scatter/heatmap artifact")
    case.add_argument("--function", required=True, choices=registry_names())
    case.add_argument("--method", required=True, choices=["kg", "eubo", "logei", "random"])
    case.add_argument("--seed", type=int, required=True)
    case.add_argument("--noise", default="det", choices=["low", "high", "det"])
    case.add_argument("--iters", type=int, default=50)
    case.add_argument("--grid", type=int, default=64)
    case.add_argument("--out", required=True, help="output JSON path")

    serve = sub.add_parser("serve", help="run the live elicitation service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--state", required=True, help="state directory for session logs")
    return parser


def _cmd_run(args) -> int:
    cfg = ExperimentConfig(
        function=args.function,
        method=args.method,
        noise=args.noise,
        iterations=args.iters,
        init_pairs=args.init_pairs,
    )
    seeds = _parse_seeds(args.seeds)
    records = run_many(cfg, seeds, out_dir=args.out, jobs=args.jobs)
    failed = [r for r in records if r.error is not None]
    for rec in failed:
        print(f"seed {rec.seed}: {rec.error}", file=sys.stderr)
    if failed:
        return EXIT_NUMERIC
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    paths = sorted(Path(args.in_dir).glob("*.jsonl"))
    if not paths:
        print(f"no .jsonl records under {args.in_dir}", file=sys.stderr)
        return EXIT_CONFIG
    records = [load_run(p) for p in paths]
    table = summarize(records)
    Path(args.out).write_text(summary_to_csv(table), encoding="utf-8")
    print(f"wrote summary of {table.n_runs} runs to {args.out}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    t = get_function(args.function)
    sigma = calibrate_sigma(t, args.target, RandomSource(args.seed))
    print(json.dumps({"function": args.function, "target": args.target, "sigma": sigma}))
    return EXIT_OK


def _cmd_case_study(args) -> int:
    cfg = ExperimentConfig(
        function=args.function,
        method=args.method,
        noise=args.noise,
        iterations=args.iters,
    )
    records = run_many(cfg, [args.seed])
    rec = records[0]
    if rec.error is not None:
        print(rec.error, file=sys.stderr)
        return EXIT_NUMERIC
    artifact = export_case_study(rec, grid_res=args.grid)
    Path(args.out).write_text(json.dumps(artifact), encoding="utf-8")
    print(f"wrote case study to {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.state)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "summarize": _cmd_summarize,
        "calibrate": _cmd_calibrate,
        "case-study": _cmd_case_study,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitError, FactorizationError, QuadratureError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
