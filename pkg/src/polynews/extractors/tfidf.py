"""Unigram TF-IDF with a frequency-capped vocabulary."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..corpus import ATTR_TEXT
from ..errors import ValidationError
from .matrix import FeatureMatrix, make_meta

# Tokens are maximal runs of Unicode alphanumerics (underscore excluded);
# single-character tokens are kept. Input is expected lowercased.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _attr_value(doc, attribute: str) -> str:
    return doc.text if attribute == ATTR_TEXT else doc.title


@dataclass
class TfidfModel:
    vocabulary: list[str]
    idf: np.ndarray
    attribute: str
    n_train_docs: int

    def term_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocabulary)}


def fit_tfidf(train_docs, attribute: str = ATTR_TEXT, max_features: int = 100) -> TfidfModel:
    """Fit vocabulary and idf weights on the training documents.

    The vocabulary is the `max_features` most frequent unigrams by total
    corpus term count, ties broken lexicographically. Idf uses the smoothed
    form ln((1 + n) / (1 + df)) + 1.
    """
    if not train_docs:
        raise ValidationError("cannot fit tf-idf on an empty document list")
    totals: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    n = 0
    for doc in train_docs:
        n += 1
        tokens = tokenize(_attr_value(doc, attribute))
        totals.update(tokens)
        doc_freq.update(set(tokens))
    if not totals:
        raise ValidationError("no tokens found in training documents")
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    vocabulary = [term for term, _ in ranked[:max_features]]
    idf = np.array(
        [math.log((1.0 + n) / (1.0 + doc_freq[t])) + 1.0 for t in vocabulary],
        dtype=np.float64,
    )
    return TfidfModel(vocabulary=vocabulary, idf=idf, attribute=attribute, n_train_docs=n)


def transform_tfidf(model: TfidfModel, docs, attribute: str | None = None, meta: dict | None = None) -> FeatureMatrix:
    """Term counts times idf, then each row L2-normalized (zero rows stay zero)."""
    attribute = attribute or model.attribute
    index = model.term_index()
    rows = np.zeros((len(docs), len(model.vocabulary)), dtype=np.float64)
    for r, doc in enumerate(docs):
        counts = Counter(tokenize(_attr_value(doc, attribute)))
        for term, cnt in counts.items():
            col = index.get(term)
            if col is not None:
                rows[r, col] = cnt * model.idf[col]
        norm = math.sqrt(float(np.dot(rows[r], rows[r])))
        if norm > 0.0:
            rows[r] /= norm
    full_meta = make_meta("tfidf", attribute=attribute)
    if meta:
        full_meta.update(meta)
    return FeatureMatrix(values=rows.astype(np.float32), meta=full_meta)
