"""Feature extractors and the shared feature-matrix interchange format."""

from ..corpus import ESP_FAKE, KAGGLE, MIXED

TFIDF = "tfidf"
LDA = "lda"
BERT_MULT = "bert_mult"
BERT_ENG = "bert_eng"
BERT_SPA = "bert_spa"

EXTRACTORS = (TFIDF, LDA, BERT_MULT, BERT_ENG, BERT_SPA)
CLASSICAL_EXTRACTORS = (TFIDF, LDA)
DEEP_EXTRACTORS = (BERT_MULT, BERT_ENG, BERT_SPA)

DISPLAY_NAMES = {
    TFIDF: "TF-IDF",
    LDA: "LDA",
    BERT_MULT: "BERT-mult",
    BERT_ENG: "BERT-eng",
    BERT_SPA: "BERT-spa",
}

# The English checkpoint never touches the Spanish corpus and the Spanish
# checkpoint never touches the English one; everything else is available
# everywhere.
_UNAVAILABLE = {(BERT_ENG, ESP_FAKE), (BERT_SPA, KAGGLE)}


def available(extractor: str, corpus_name: str) -> bool:
    return (extractor, corpus_name) not in _UNAVAILABLE


def availability_matrix() -> dict[str, dict[str, bool]]:
    return {
        e: {c: available(e, c) for c in (ESP_FAKE, KAGGLE, MIXED)} for e in EXTRACTORS
    }


from .matrix import FeatureMatrix, load_embeddings, load_labels, load_matrix, save_labels, save_matrix  # noqa: E402
from .tfidf import TfidfModel, fit_tfidf, tokenize, transform_tfidf  # noqa: E402
from .lda import LdaModel, fit_lda, perplexity, transform_lda  # noqa: E402

__all__ = [
    "TFIDF",
    "LDA",
    "BERT_MULT",
    "BERT_ENG",
    "BERT_SPA",
    "EXTRACTORS",
    "CLASSICAL_EXTRACTORS",
    "DEEP_EXTRACTORS",
    "DISPLAY_NAMES",
    "available",
    "availability_matrix",
    "FeatureMatrix",
    "save_matrix",
    "load_matrix",
    "load_embeddings",
    "save_labels",
    "load_labels",
    "TfidfModel",
    "fit_tfidf",
    "transform_tfidf",
    "tokenize",
    "LdaModel",
    "fit_lda",
    "transform_lda",
    "perplexity",
]
