"""Shared test fixtures: synthetic corpora, CSV writers, embedding fixtures."""

from __future__ import annotations

import csv
import os

import numpy as np

from polynews import pipeline
from polynews.corpus import Document, ENG, SPA
from polynews.extractors.matrix import FeatureMatrix, save_labels, save_matrix
from polynews.pipeline import ids_sha256

# Two vocabularies per language so classifiers have signal to learn; class-1
# documents lean on the second half of the vocabulary.
_WORDS = {
    ENG: ["market", "eleccion", "policy", "mayor", "river", "sport", "shock", "!miracle", "cure", "scandal"],
    SPA: ["mercado", "politica", "rio", "deporte", "alcalde", "nacion", "milagro", "cura", "escandalo", "golpe"],
}


def synthetic_documents(language, n_docs, seed, prefix="doc"):
    """Balanced binary corpus with class-dependent token distributions."""
    rng = np.random.default_rng(seed)
    words = _WORDS[language]
    docs = []
    for i in range(n_docs):
        label = i % 2
        weights = np.ones(len(words))
        if label:
            weights[len(words) // 2 :] = 6.0
        else:
            weights[: len(words) // 2] = 6.0
        weights /= weights.sum()
        length = int(rng.integers(8, 20))
        tokens = rng.choice(words, size=length, p=weights)
        title = " ".join(rng.choice(words, size=3, p=weights))
        docs.append(
            Document(
                id=f"{prefix}:{i}",
                language=language,
                title=title,
                text=" ".join(tokens),
                label=label,
            )
        )
    return docs


def write_esp_csv(path, n_docs=24, seed=7):
    docs = synthetic_documents(SPA, n_docs, seed)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Id", "Category", "Topic", "Source", "Headline", "Text", "Link"])
        for i, d in enumerate(docs):
            writer.writerow(
                [i, "Fake" if d.label else "True", "t", "s", d.title, d.text, "http://x"]
            )
    return docs


def write_kaggle_csv(path, n_docs=24, seed=11):
    docs = synthetic_documents(ENG, n_docs, seed)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "title", "author", "text", "label"])
        for i, d in enumerate(docs):
            writer.writerow([i, d.title, "a", d.text, d.label])
    return docs


def write_synthetic_embeddings(cfg, corpora, positions, width=768):
    """Seeded random FMX1 fixtures for every file a config expects.

    Row counts and document-id checksums follow the fold plans, so the
    fixtures pass the same provenance checks real exports must pass.
    """
    os.makedirs(cfg.embeddings_dir, exist_ok=True)
    written = []
    for spec in pipeline.expected_embedding_files(cfg):
        target = spec["eval_corpus"]
        corpus = corpora[target]
        if spec["role"] == "full":
            docs = corpus.documents
        else:
            pos = positions[target][spec["repetition"]][spec["fold"]]
            docs = [corpus.documents[p] for p in pos]
        rng = np.random.default_rng(pipeline.derive_seed(cfg.seed, "fixture", spec["file"]))
        values = rng.normal(size=(len(docs), width)).astype(np.float32)
        # weak class signal so training is not purely noise
        labels = np.array([d.label for d in docs])
        values[:, 0] += 2.0 * labels
        meta = {k: spec[k] for k in ("extractor", "train_corpus", "eval_corpus", "attribute", "repetition", "fold")}
        if "tuned_on_fold" in spec:
            meta["tuned_on_fold"] = spec["tuned_on_fold"]
        meta["doc_ids_sha256"] = ids_sha256([d.id for d in docs])
        path = os.path.join(cfg.embeddings_dir, spec["file"])
        save_matrix(FeatureMatrix(values=values, meta=meta), path)
        save_labels(
            path.replace(".fmx1", ".lbl1"),
            labels.astype(np.uint8),
            np.array([0 if d.language == ENG else 1 for d in docs], dtype=np.uint8),
        )
        written.append(path)
    return written


def small_mlp_opts(hidden=(16,), max_epochs=40, patience=5):
    return {"hidden": list(hidden), "max_epochs": max_epochs, "patience": patience, "batch_size": 8}


def small_lda_opts(n_topics=8, passes=3):
    return {
        "n_topics": n_topics,
        "passes": passes,
        "max_e_iters": 50,
        "min_df": 2,
        "max_df": 0.95,
        "chunk_size": 64,
    }
