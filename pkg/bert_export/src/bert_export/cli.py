"""Export CLI.

    bert-export export --checkpoint {eng|spa|mult} --corpus NAME
                       --attribute {text|title} --foldplan PATH --out DIR
                       [--untuned] [--eval-corpus NAME --eval-foldplan PATH]
                       [--checkpoint-path DIR] [--esp-csv PATH]
                       [--kaggle-csv PATH] [--seed N] [--batch-size N]
                       [--max-length N]

Writes one FMX1 (+LBL1) pair per (repetition, tuning fold) x {train, eval}
plus a fine-tuning hygiene manifest per job.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import load_corpus
from .encoder import DEFAULT_CHECKPOINTS, JobError
from .jobs import ExportJob, load_fold_plan, run_export, run_full_export


def _build_parser():
    parser = argparse.ArgumentParser(prog="bert-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="fine-tune per fold and export embeddings")
    p.add_argument("--checkpoint", required=True, choices=("eng", "spa", "mult"))
    p.add_argument("--checkpoint-path", default=None, help="local checkpoint directory (overrides the hub name)")
    p.add_argument("--corpus", required=True, choices=("esp_fake", "kaggle", "mixed"))
    p.add_argument("--attribute", default="text", choices=("text", "title"))
    p.add_argument("--foldplan", default=None, help="fold plan JSON for --corpus (required unless --full)")
    p.add_argument("--out", required=True, help="output directory for FMX1 files")
    p.add_argument("--untuned", action="store_true", help="skip fine-tuning (fast integration runs)")
    p.add_argument("--full", action="store_true",
                   help="whole-corpus export for heatmap grids (no fold plan)")
    p.add_argument("--eval-corpus", default=None, choices=("esp_fake", "kaggle", "mixed"),
                   help="embed this corpus instead of --corpus (cross-language exports)")
    p.add_argument("--eval-foldplan", default=None, help="fold plan JSON for --eval-corpus")
    p.add_argument("--esp-csv", default=None)
    p.add_argument("--kaggle-csv", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--max-length", type=int, default=None)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        target = args.eval_corpus or args.corpus
        if not args.full and not args.foldplan:
            print("problem: --foldplan is required unless --full", file=sys.stderr)
            return 2
        if not args.full and target != args.corpus and not args.eval_foldplan:
            print("problem: --eval-corpus needs --eval-foldplan", file=sys.stderr)
            return 2
        job = ExportJob(
            checkpoint=args.checkpoint,
            checkpoint_path=args.checkpoint_path or DEFAULT_CHECKPOINTS[args.checkpoint],
            source_corpus=args.corpus,
            target_corpus=target,
            attribute=args.attribute,
            fold_plan=load_fold_plan(args.foldplan) if args.foldplan else None,
            target_fold_plan=load_fold_plan(args.eval_foldplan) if args.eval_foldplan else None,
            out_dir=args.out,
            untuned=args.untuned,
            seed=args.seed,
            batch_size=args.batch_size,
            max_length=args.max_length,
        )
        source_docs = load_corpus(args.corpus, esp_csv=args.esp_csv, kaggle_csv=args.kaggle_csv)
        target_docs = (
            source_docs
            if target == args.corpus
            else load_corpus(target, esp_csv=args.esp_csv, kaggle_csv=args.kaggle_csv)
        )
        exporter = run_full_export if args.full else run_export
        written = exporter(job, source_docs, target_docs)
        print(f"wrote {len(written)} matrix files to {job.out_dir}")
        return 0
    except (JobError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
