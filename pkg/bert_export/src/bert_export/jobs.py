"""Export jobs: per-(repetition, fold) fine-tune + FMX1 emission.

File naming contract (shared with the classification pipeline):

    <extractor>_<source>_<target>_<attribute>_r<rep>_t<tunefold>_<role>.fmx1

role=train holds the rows of `target`'s fold <tunefold>, role=eval the
rows of the other fold, both embedded by the checkpoint fine-tuned on
`source`'s fold <tunefold>. A hygiene manifest per (rep, tunefold)
records exactly which documents the fine-tuning saw.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from .corpus import Doc, LANG_CODES, attr_value
from .encoder import Encoder, JobError
from .fmx import write_fmx, write_lbl

CHECKPOINT_EXTRACTOR_IDS = {"eng": "bert_eng", "spa": "bert_spa", "mult": "bert_mult"}

# language-dedicated checkpoints never touch the other language's corpus
_UNAVAILABLE = {("eng", "esp_fake"), ("spa", "kaggle")}


def available(checkpoint: str, corpus_name: str) -> bool:
    return (checkpoint, corpus_name) not in _UNAVAILABLE


def ids_sha256(doc_ids) -> str:
    return hashlib.sha256("\n".join(doc_ids).encode("utf-8")).hexdigest()


@dataclass
class ExportJob:
    checkpoint: str  # eng | spa | mult
    checkpoint_path: str
    source_corpus: str  # corpus whose folds drive fine-tuning
    target_corpus: str  # corpus whose documents are embedded
    attribute: str
    fold_plan: dict | None  # parsed fold-plan JSON; None only for full-corpus exports
    out_dir: str
    untuned: bool = False
    seed: int = 0
    batch_size: int = 16
    max_length: int | None = None
    target_fold_plan: dict | None = None  # when target differs from source

    def __post_init__(self):
        if not available(self.checkpoint, self.source_corpus):
            raise JobError(
                f"checkpoint {self.checkpoint!r} is unavailable for corpus {self.source_corpus!r}"
            )
        if not available(self.checkpoint, self.target_corpus):
            raise JobError(
                f"checkpoint {self.checkpoint!r} is unavailable for corpus {self.target_corpus!r}"
            )
        if self.fold_plan is None:
            return
        if self.fold_plan["corpus"] != self.source_corpus:
            raise JobError(
                f"fold plan is for {self.fold_plan['corpus']!r}, job trains on {self.source_corpus!r}"
            )
        tp = self.target_fold_plan or self.fold_plan
        if tp["corpus"] != self.target_corpus:
            raise JobError(
                f"target fold plan is for {tp['corpus']!r}, job embeds {self.target_corpus!r}"
            )

    @property
    def extractor_id(self) -> str:
        return CHECKPOINT_EXTRACTOR_IDS[self.checkpoint]


def load_fold_plan(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        plan = json.load(fh)
    if len(plan["repetitions"]) != 5 or any(len(r) != 2 for r in plan["repetitions"]):
        raise JobError(f"{path}: fold plan must hold 5 repetitions of 2 folds")
    return plan


def file_name(extractor, source, target, attribute, rep, tune_fold, role) -> str:
    return f"{extractor}_{source}_{target}_{attribute}_r{rep}_t{tune_fold}_{role}.fmx1"


def full_file_name(extractor, source, target, attribute) -> str:
    return f"{extractor}_{source}_{target}_{attribute}_full.fmx1"


def run_full_export(job: ExportJob, source_docs: list[Doc], target_docs: list[Doc]) -> list[str]:
    """Whole-corpus export for heatmap grids: one file per (source, target).

    Fine-tunes on the entire source corpus (or none with untuned) and
    embeds the entire target corpus in document order.
    """
    os.makedirs(job.out_dir, exist_ok=True)
    encoder = Encoder(job.checkpoint_path, max_length=job.max_length)
    if not job.untuned:
        encoder.finetune(
            [attr_value(d, job.attribute) for d in source_docs],
            [d.label for d in source_docs],
            seed=job.seed,
            batch_size=job.batch_size,
        )
    values = encoder.embed([attr_value(d, job.attribute) for d in target_docs])
    meta = {
        "extractor": job.extractor_id,
        "train_corpus": job.source_corpus,
        "eval_corpus": job.target_corpus,
        "attribute": job.attribute,
        "repetition": -1,
        "fold": -1,
        "untuned": job.untuned,
        "doc_ids_sha256": ids_sha256([d.id for d in target_docs]),
    }
    path = os.path.join(
        job.out_dir, full_file_name(job.extractor_id, job.source_corpus, job.target_corpus, job.attribute)
    )
    write_fmx(path, values, meta)
    write_lbl(
        path.replace(".fmx1", ".lbl1"),
        [d.label for d in target_docs],
        [LANG_CODES[d.language] for d in target_docs],
    )
    return [path]


def _fold_docs(plan: dict, by_id: dict[str, Doc], rep: int, fold: int) -> list[Doc]:
    try:
        return [by_id[i] for i in plan["repetitions"][rep][fold]]
    except KeyError as exc:
        raise JobError(f"fold plan references unknown document id {exc}") from exc


def run_export(job: ExportJob, source_docs: list[Doc], target_docs: list[Doc]) -> list[str]:
    """Export FMX1/LBL1 files for every (repetition, fold); returns paths.

    For each repetition and tuning fold: fine-tune on the source training
    fold only (skipped when untuned), then embed both target folds.
    """
    if job.fold_plan is None:
        raise JobError("per-fold export needs a fold plan")
    os.makedirs(job.out_dir, exist_ok=True)
    source_by_id = {d.id: d for d in source_docs}
    target_by_id = {d.id: d for d in target_docs}
    target_plan = job.target_fold_plan or job.fold_plan
    written = []

    # untuned exports never mutate weights, so one encoder serves all folds;
    # fine-tuned exports reload the pristine checkpoint per tuning fold
    shared_encoder = Encoder(job.checkpoint_path, max_length=job.max_length) if job.untuned else None

    for rep in range(5):
        for tune_fold in (0, 1):
            encoder = shared_encoder or Encoder(job.checkpoint_path, max_length=job.max_length)
            train_docs = _fold_docs(job.fold_plan, source_by_id, rep, tune_fold)
            if not job.untuned:
                encoder.finetune(
                    [attr_value(d, job.attribute) for d in train_docs],
                    [d.label for d in train_docs],
                    seed=job.seed + 1000 * rep + tune_fold,
                    batch_size=job.batch_size,
                )
            manifest = {
                "repetition": rep,
                "tuned_on_fold": tune_fold,
                "untuned": job.untuned,
                "checkpoint": job.checkpoint,
                "source_corpus": job.source_corpus,
                "n_train_docs": len(train_docs),
                "train_doc_ids_sha256": ids_sha256([d.id for d in train_docs]),
            }
            for role, fold in (("train", tune_fold), ("eval", 1 - tune_fold)):
                docs = _fold_docs(target_plan, target_by_id, rep, fold)
                values = encoder.embed([attr_value(d, job.attribute) for d in docs])
                meta = {
                    "extractor": job.extractor_id,
                    "train_corpus": job.source_corpus,
                    "eval_corpus": job.target_corpus,
                    "attribute": job.attribute,
                    "repetition": rep,
                    "fold": fold,
                    "tuned_on_fold": tune_fold,
                    "doc_ids_sha256": ids_sha256([d.id for d in docs]),
                }
                path = os.path.join(
                    job.out_dir,
                    file_name(job.extractor_id, job.source_corpus, job.target_corpus, job.attribute, rep, tune_fold, role),
                )
                write_fmx(path, values, meta)
                write_lbl(
                    path.replace(".fmx1", ".lbl1"),
                    [d.label for d in docs],
                    [LANG_CODES[d.language] for d in docs],
                )
                written.append(path)
            manifest_path = os.path.join(
                job.out_dir,
                f"hygiene_{job.extractor_id}_{job.source_corpus}_{job.attribute}_r{rep}_t{tune_fold}.json",
            )
            with open(manifest_path, "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, sort_keys=True, indent=1)
    return written
