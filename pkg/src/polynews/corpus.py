"""Corpus ingestion, normalization, and stratified 5x2 fold planning."""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CsvParseError, ValidationError

ENG = "eng"
SPA = "spa"
LANGUAGES = (ENG, SPA)
LANG_CODES = {ENG: 0, SPA: 1}

LEGIT = 0
FAKE = 1

ESP_FAKE = "esp_fake"
KAGGLE = "kaggle"
MIXED = "mixed"
CORPUS_NAMES = (ESP_FAKE, KAGGLE, MIXED)

ESP_FAKE_CSV = "esp_fake_csv"
KAGGLE_CSV = "kaggle_csv"

ATTR_TEXT = "text"
ATTR_TITLE = "title"
ATTRIBUTES = (ATTR_TEXT, ATTR_TITLE)

# Known source-dataset sizes (total, negative, positive), used to audit
# ingests; a mismatch is reported, not fatal.
REFERENCE_COUNTS = {
    ESP_FAKE: (676, 338, 338),
    KAGGLE: (20800, 10387, 10413),
    MIXED: (21476, 10725, 10751),
}

N_REPETITIONS = 5


@dataclass(frozen=True)
class Document:
    id: str
    language: str
    title: str
    text: str
    label: int


@dataclass
class IngestReport:
    source: str
    path: str
    rows_read: int = 0
    dropped_missing_text: int = 0
    n_documents: int = 0
    n_negative: int = 0
    n_positive: int = 0
    matches_reference: bool | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Corpus:
    name: str
    documents: list[Document]
    ingest_report: IngestReport | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.documents)

    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.documents], dtype=np.int64)

    def languages(self) -> list[str]:
        return [d.language for d in self.documents]

    def index_by_id(self) -> dict[str, int]:
        return {d.id: i for i, d in enumerate(self.documents)}


_SOURCES = {
    ESP_FAKE_CSV: {
        "corpus": ESP_FAKE,
        "language": SPA,
        "columns": ("Category", "Headline", "Text"),
        "title_col": "Headline",
        "text_col": "Text",
        "label_col": "Category",
        "label_map": {"fake": FAKE, "true": LEGIT},
    },
    KAGGLE_CSV: {
        "corpus": KAGGLE,
        "language": ENG,
        "columns": ("title", "text", "label"),
        "title_col": "title",
        "text_col": "text",
        "label_col": "label",
        "label_map": {"1": FAKE, "0": LEGIT},
    },
}


def ingest(path, source: str) -> Corpus:
    """Read one of the two source CSVs into a Corpus.

    Document ids are ``<corpus>:<data-row-index>`` (0-based, counting every
    data row in the file, including dropped ones). Rows with missing or
    empty text are dropped and counted in the attached ingest report.
    """
    if source not in _SOURCES:
        raise ValidationError(f"unknown ingest source {source!r}")
    spec = _SOURCES[source]
    name = spec["corpus"]
    report = IngestReport(source=source, path=str(path))
    documents: list[Document] = []

    csv.field_size_limit(min(sys.maxsize, 2**31 - 1))
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            if header is None:
                raise ValidationError(f"empty corpus: {path} has no header row")
            missing = [c for c in spec["columns"] if c not in header]
            if missing:
                raise CsvParseError(
                    f"{path}: missing required column(s) {missing} in header {header}"
                )
            row_index = -1
            try:
                for row in reader:
                    row_index += 1
                    report.rows_read += 1
                    text = (row.get(spec["text_col"]) or "").strip()
                    if not text:
                        report.dropped_missing_text += 1
                        continue
                    title = (row.get(spec["title_col"]) or "").strip()
                    raw_label = (row.get(spec["label_col"]) or "").strip()
                    key = raw_label.lower()
                    if key not in spec["label_map"]:
                        raise ValidationError(
                            f"unknown label token {raw_label!r} at data row {row_index} of {path}"
                        )
                    documents.append(
                        Document(
                            id=f"{name}:{row_index}",
                            language=spec["language"],
                            title=title,
                            text=text,
                            label=spec["label_map"][key],
                        )
                    )
            except csv.Error as exc:
                raise CsvParseError(f"{path}: malformed CSV near line {reader.line_num}: {exc}") from exc
    except FileNotFoundError as exc:
        raise ValidationError(f"corpus file not found: {path}") from exc

    if not documents:
        raise ValidationError(f"empty corpus: {path} contains no usable rows")

    labels = [d.label for d in documents]
    report.n_documents = len(documents)
    report.n_positive = sum(labels)
    report.n_negative = len(labels) - report.n_positive
    ref = REFERENCE_COUNTS.get(name)
    if ref is not None:
        report.matches_reference = (
            report.n_documents,
            report.n_negative,
            report.n_positive,
        ) == ref
    return Corpus(name=name, documents=documents, ingest_report=report)


def mix(a: Corpus, b: Corpus) -> Corpus:
    """Concatenate two corpora (a then b) into the mixed corpus."""
    ids_a = {d.id for d in a.documents}
    ids_b = {d.id for d in b.documents}
    clash = ids_a & ids_b
    if clash:
        raise ValidationError(f"duplicate document id(s) when mixing: {sorted(clash)[:5]}")
    return Corpus(name=MIXED, documents=list(a.documents) + list(b.documents))


def normalize(doc: Document) -> Document:
    """Lowercase title and text (Unicode-aware); tokenization happens later."""
    return replace(doc, title=doc.title.lower(), text=doc.text.lower())


def normalize_corpus(corpus: Corpus) -> Corpus:
    return Corpus(
        name=corpus.name,
        documents=[normalize(d) for d in corpus.documents],
        ingest_report=corpus.ingest_report,
    )


# ---------------------------------------------------------------------------
# Fold planning
#
# Stratified 5x2 cross-validation. The stratification key is always
# (language, class); for single-language corpora that degenerates to
# class-only strata, and for the mixed corpus it yields four strata. Each
# stratum is shuffled with an rng seeded by (seed + repetition, stratum
# code), so the mixed corpus plan assigns every document to the same fold
# it gets in its source-corpus plan for the same seed.

_STRATUM_CODES = {
    (ENG, LEGIT): 0,
    (ENG, FAKE): 1,
    (SPA, LEGIT): 2,
    (SPA, FAKE): 3,
}


@dataclass
class FoldPlan:
    corpus_name: str
    seed: int
    repetitions: list[tuple[list[str], list[str]]]

    def as_dict(self) -> dict:
        return {
            "corpus": self.corpus_name,
            "seed": self.seed,
            "repetitions": [[list(f0), list(f1)] for f0, f1 in self.repetitions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldPlan":
        reps = [(list(r[0]), list(r[1])) for r in d["repetitions"]]
        return cls(corpus_name=d["corpus"], seed=int(d["seed"]), repetitions=reps)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "FoldPlan":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def fold_positions(self, corpus: Corpus) -> list[tuple[np.ndarray, np.ndarray]]:
        """Map fold document ids to positions in `corpus` for every repetition."""
        index = corpus.index_by_id()
        out = []
        for f0, f1 in self.repetitions:
            try:
                p0 = np.array([index[i] for i in f0], dtype=np.int64)
                p1 = np.array([index[i] for i in f1], dtype=np.int64)
            except KeyError as exc:
                raise ValidationError(
                    f"fold plan for {self.corpus_name!r} references unknown document id {exc}"
                ) from exc
            out.append((p0, p1))
        return out


def make_fold_plan(corpus: Corpus, seed: int) -> FoldPlan:
    """Build 5 independent stratified 2-fold partitions of `corpus`."""
    if seed < 0:
        raise ValidationError("fold plan seed must be non-negative")
    strata: dict[int, list[int]] = {}
    for pos, doc in enumerate(corpus.documents):
        code = _STRATUM_CODES[(doc.language, doc.label)]
        strata.setdefault(code, []).append(pos)
    for code, positions in strata.items():
        if len(positions) < 2:
            raise ValidationError(
                f"stratum with < 2 documents (stratum code {code}, "
                f"{len(positions)} document(s)) cannot be split into two folds"
            )

    repetitions = []
    for rep in range(N_REPETITIONS):
        fold0: list[int] = []
        fold1: list[int] = []
        for code in sorted(strata):
            positions = strata[code]
            n = len(positions)
            rng = np.random.default_rng(np.random.SeedSequence((seed + rep, code)))
            perm = rng.permutation(n)
            half = n // 2
            if n % 2:
                half += int(rng.integers(0, 2))
            fold0.extend(positions[k] for k in perm[:half])
            fold1.extend(positions[k] for k in perm[half:])
        fold0.sort()
        fold1.sort()
        repetitions.append(
            (
                [corpus.documents[p].id for p in fold0],
                [corpus.documents[p].id for p in fold1],
            )
        )
    return FoldPlan(corpus_name=corpus.name, seed=seed, repetitions=repetitions)
