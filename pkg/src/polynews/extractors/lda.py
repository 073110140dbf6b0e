"""Topic-model features via online variational Bayes.

Mini-batch updates on a symmetric Dirichlet model: the E step infers
per-document topic proportions (see polynews.accel for the kernel), the M
step blends sufficient statistics into the topic-word variational
parameters with a decaying learning rate (offset + t)^(-decay). Document
rows come out as normalized posterior topic proportions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .. import accel
from ..corpus import ATTR_TEXT
from ..errors import ValidationError
from .matrix import FeatureMatrix, make_meta
from .tfidf import tokenize

MEAN_CHANGE_TOL = 1e-3


def _attr_value(doc, attribute: str) -> str:
    return doc.text if attribute == ATTR_TEXT else doc.title


@dataclass
class LdaModel:
    vocabulary: list[str]
    lam: np.ndarray  # (n_topics, vocab) variational topic-word parameters
    alpha: float
    eta: float
    n_topics: int
    attribute: str
    max_e_iters: int
    seed: int
    term_to_col: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.term_to_col:
            self.term_to_col = {t: i for i, t in enumerate(self.vocabulary)}

    def topic_word(self) -> np.ndarray:
        """Row-normalized topic-word distributions."""
        return self.lam / self.lam.sum(axis=1, keepdims=True)

    def exp_elog_beta(self) -> np.ndarray:
        elog = accel.digamma(self.lam) - accel.digamma(self.lam.sum(axis=1))[:, None]
        return np.exp(elog)


def build_vocabulary(docs, attribute: str = ATTR_TEXT, min_df: int = 20, max_df: float = 0.5) -> list[str]:
    """Terms present in at least `min_df` documents and at most `max_df` of them."""
    n = len(docs)
    doc_freq: dict[str, int] = {}
    for doc in docs:
        for term in set(tokenize(_attr_value(doc, attribute))):
            doc_freq[term] = doc_freq.get(term, 0) + 1
    limit = max_df * n
    vocab = sorted(t for t, df in doc_freq.items() if df >= min_df and df <= limit)
    return vocab


def _bow(docs, attribute: str, term_to_col: dict[str, int]):
    """CSR-style (ids, counts, offsets) arrays over the model vocabulary."""
    ids: list[int] = []
    cts: list[float] = []
    offsets = [0]
    for doc in docs:
        counts: dict[int, float] = {}
        for term in tokenize(_attr_value(doc, attribute)):
            col = term_to_col.get(term)
            if col is not None:
                counts[col] = counts.get(col, 0.0) + 1.0
        for col in sorted(counts):
            ids.append(col)
            cts.append(counts[col])
        offsets.append(len(ids))
    return (
        np.array(ids, dtype=np.int64),
        np.array(cts, dtype=np.float64),
        np.array(offsets, dtype=np.int64),
    )


def fit_lda(
    train_docs,
    attribute: str = ATTR_TEXT,
    n_topics: int = 100,
    chunk_size: int = 2000,
    passes: int = 20,
    max_e_iters: int = 400,
    min_df: int = 20,
    max_df: float = 0.5,
    decay: float = 0.5,
    offset: float = 1.0,
    seed: int = 0,
) -> LdaModel:
    vocab = build_vocabulary(train_docs, attribute, min_df=min_df, max_df=max_df)
    if not vocab:
        raise ValidationError(
            f"vocabulary is empty after document-frequency filtering "
            f"(min_df={min_df}, max_df={max_df})"
        )
    term_to_col = {t: i for i, t in enumerate(vocab)}
    ids, cts, offsets = _bow(train_docs, attribute, term_to_col)

    alpha = eta = 1.0 / n_topics
    n_docs = len(train_docs)
    rng = np.random.default_rng(seed)
    lam = rng.gamma(100.0, 1.0 / 100.0, (n_topics, len(vocab)))

    update_count = 0
    for _ in range(passes):
        for start in range(0, n_docs, chunk_size):
            stop = min(start + chunk_size, n_docs)
            batch = slice(offsets[start], offsets[stop])
            batch_offsets = offsets[start : stop + 1] - offsets[start]
            elog = accel.digamma(lam) - accel.digamma(lam.sum(axis=1))[:, None]
            exp_elog_beta = np.exp(elog)
            gamma_init = rng.gamma(100.0, 1.0 / 100.0, (stop - start, n_topics))
            _, sstats = accel.lda_estep(
                ids[batch],
                cts[batch],
                batch_offsets,
                exp_elog_beta,
                alpha,
                gamma_init,
                max_e_iters,
                MEAN_CHANGE_TOL,
            )
            sstats *= exp_elog_beta
            rho = (offset + update_count) ** (-decay)
            lam = (1.0 - rho) * lam + rho * (eta + n_docs * sstats / (stop - start))
            update_count += 1

    return LdaModel(
        vocabulary=vocab,
        lam=lam,
        alpha=alpha,
        eta=eta,
        n_topics=n_topics,
        attribute=attribute,
        max_e_iters=max_e_iters,
        seed=seed,
    )


def _infer_gamma(model: LdaModel, docs, attribute: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ids, cts, offsets = _bow(docs, attribute, model.term_to_col)
    gamma_init = np.ones((len(docs), model.n_topics), dtype=np.float64)
    gamma, _ = accel.lda_estep(
        ids,
        cts,
        offsets,
        model.exp_elog_beta(),
        model.alpha,
        gamma_init,
        model.max_e_iters,
        MEAN_CHANGE_TOL,
    )
    return gamma, ids, cts, offsets


def transform_lda(model: LdaModel, docs, attribute: str | None = None, meta: dict | None = None) -> FeatureMatrix:
    """Normalized posterior topic proportions per document (rows sum to 1)."""
    attribute = attribute or model.attribute
    gamma, _, _, _ = _infer_gamma(model, docs, attribute)
    rows = gamma / gamma.sum(axis=1, keepdims=True)
    full_meta = make_meta("lda", attribute=attribute)
    if meta:
        full_meta.update(meta)
    return FeatureMatrix(values=rows.astype(np.float32), meta=full_meta)


def variational_bound(model: LdaModel, docs, attribute: str | None = None) -> float:
    """Evidence lower bound of `docs` under the fitted model.

    The document set passed in is treated as the whole population (no
    subsampling correction), which makes the value comparable across models
    sharing vocabulary and topic count.
    """
    attribute = attribute or model.attribute
    gamma, ids, cts, offsets = _infer_gamma(model, docs, attribute)
    elog_theta = accel.digamma(gamma) - accel.digamma(gamma.sum(axis=1))[:, None]
    elog_beta = accel.digamma(model.lam) - accel.digamma(model.lam.sum(axis=1))[:, None]

    score = 0.0
    for d in range(len(docs)):
        lo, hi = offsets[d], offsets[d + 1]
        if hi == lo:
            continue
        # log sum_k exp(Elogtheta_dk + Elogbeta_kw), stabilized
        temp = elog_theta[d][:, None] + elog_beta[:, ids[lo:hi]]
        tmax = temp.max(axis=0)
        score += float(np.dot(cts[lo:hi], np.log(np.exp(temp - tmax).sum(axis=0)) + tmax))

    alpha, eta = model.alpha, model.eta
    n_topics, vocab_size = model.lam.shape
    score += float(np.sum((alpha - gamma) * elog_theta))
    score += float(np.sum(gammaln(gamma) - gammaln(alpha)))
    score += float(np.sum(gammaln(alpha * n_topics) - gammaln(gamma.sum(axis=1))))
    score += float(np.sum((eta - model.lam) * elog_beta))
    score += float(np.sum(gammaln(model.lam) - gammaln(eta)))
    score += float(np.sum(gammaln(eta * vocab_size) - gammaln(model.lam.sum(axis=1))))
    return score


def perplexity(model: LdaModel, docs, attribute: str | None = None) -> float:
    """exp(-bound / token count) over the in-vocabulary tokens of `docs`."""
    attribute = attribute or model.attribute
    _, cts, _ = _bow(docs, attribute, model.term_to_col)
    total = float(cts.sum())
    if total == 0.0:
        return float("inf")
    bound = variational_bound(model, docs, attribute)
    return float(np.exp(-bound / total))
