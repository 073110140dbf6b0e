"""Corpus loading matching the classification pipeline's ingest contract.

Ids are ``<corpus>:<row_index>`` over every data row of the source file
(dropped rows still consume an index); rows with empty text are dropped;
the mixed corpus is the Spanish corpus followed by the English one. Text
is lowercased before tokenization.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass

ENG = "eng"
SPA = "spa"
LANG_CODES = {ENG: 0, SPA: 1}

ESP_FAKE = "esp_fake"
KAGGLE = "kaggle"
MIXED = "mixed"

ATTR_TEXT = "text"
ATTR_TITLE = "title"


@dataclass(frozen=True)
class Doc:
    id: str
    language: str
    title: str
    text: str
    label: int


def _read(path, corpus, language, title_col, text_col, label_col, label_map):
    csv.field_size_limit(min(sys.maxsize, 2**31 - 1))
    docs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row_index, row in enumerate(reader):
            text = (row.get(text_col) or "").strip()
            if not text:
                continue
            raw = (row.get(label_col) or "").strip().lower()
            if raw not in label_map:
                raise ValueError(f"unknown label token {raw!r} at data row {row_index} of {path}")
            docs.append(
                Doc(
                    id=f"{corpus}:{row_index}",
                    language=language,
                    title=((row.get(title_col) or "").strip()).lower(),
                    text=text.lower(),
                    label=label_map[raw],
                )
            )
    if not docs:
        raise ValueError(f"empty corpus: {path}")
    return docs


def load_corpus(name: str, esp_csv=None, kaggle_csv=None) -> list[Doc]:
    if name == ESP_FAKE:
        return _read(esp_csv, ESP_FAKE, SPA, "Headline", "Text", "Category", {"fake": 1, "true": 0})
    if name == KAGGLE:
        return _read(kaggle_csv, KAGGLE, ENG, "title", "text", "label", {"1": 1, "0": 0})
    if name == MIXED:
        return load_corpus(ESP_FAKE, esp_csv=esp_csv) + load_corpus(KAGGLE, kaggle_csv=kaggle_csv)
    raise ValueError(f"unknown corpus {name!r}")


def attr_value(doc: Doc, attribute: str) -> str:
    return doc.text if attribute == ATTR_TEXT else doc.title
