"""Command-line entry point.

Subcommands:
    run <config.json>        execute an experiment end to end
    validate <config.json>   report config problems (add --manifest for the
                             expected embedding-file manifest)
    report <run-dir>         re-render report files from persisted scores
    heatmap <run-dir>        list the heatmap CSVs of a heatmap run

Exit codes: 0 success, 2 validation failure, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import pipeline
from .errors import ConfigError, PolynewsError, StageError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polynews", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment config JSON")
    p_run.add_argument(
        "--workers",
        type=int,
        default=None,
        help=f"parallel fold workers (default: ${pipeline.WORKERS_ENV} or 1)",
    )

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    p_val.add_argument(
        "--manifest",
        action="store_true",
        help="print the expected embedding-file manifest as JSON",
    )

    p_rep = sub.add_parser("report", help="re-render reports from a run directory")
    p_rep.add_argument("run_dir")

    p_heat = sub.add_parser("heatmap", help="show heatmap artifacts of a run directory")
    p_heat.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = pipeline.load_config(args.config)
            problems = pipeline.validate(cfg)
            if problems:
                for p in problems:
                    print(f"problem: {p}", file=sys.stderr)
                return 2
            result = pipeline.run(cfg, workers=args.workers)
            print(f"run directory: {result.run_dir}")
            for kind, path in sorted(result.report_paths.items()):
                print(f"{kind}: {path}")
            return 0

        if args.command == "validate":
            cfg = pipeline.load_config(args.config)
            problems = pipeline.validate(cfg)
            if args.manifest:
                manifest = pipeline.expected_embedding_files(cfg)
                print(json.dumps({"embeddings_dir": cfg.embeddings_dir, "files": manifest}, indent=1))
            if problems:
                for p in problems:
                    print(f"problem: {p}", file=sys.stderr)
                return 2
            if not args.manifest:
                print("config OK")
            return 0

        if args.command == "report":
            paths = pipeline.rerender_report(args.run_dir)
            for kind, path in sorted(paths.items()):
                print(f"{kind}: {path}")
            return 0

        if args.command == "heatmap":
            heat_dir = os.path.join(args.run_dir, "heatmaps")
            index_path = os.path.join(heat_dir, "index.json")
            if not os.path.exists(index_path):
                print(f"problem: {args.run_dir} has no heatmap artifacts", file=sys.stderr)
                return 2
            with open(index_path, "r", encoding="utf-8") as fh:
                index = json.load(fh)
            for entry in index:
                status = entry.get("file", entry.get("status", "?"))
                print(f"{entry['extractor']} {entry['train']} -> {entry['eval']}: {status}")
            return 0
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"problem: {exc}", file=sys.stderr)
        return 2
    except PolynewsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
