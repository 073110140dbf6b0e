"""SIS and ERS integration: support accumulation with language-aware rules.

Base classifiers emit class-probability support vectors. Members sharing a
training corpus and language coverage are integrated internally (plain
mean). When a pool spans coverages, each group's mean support is extended
into the language-class space first: monolingual groups keep their full
support inside their own language block and contribute exact zeros to the
foreign one, while multilingual groups replicate each class support into
every language block divided by the number of languages, keeping the
extended vector a probability vector. The extended means are then averaged
across groups and the argmax decoded into a (language, class) prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import mlp, reduction
from .corpus import ENG, ESP_FAKE, FAKE, KAGGLE, LEGIT, MIXED, SPA
from .errors import ConfigError, ValidationError
from .extractors import BERT_ENG, BERT_MULT, BERT_SPA, DEEP_EXTRACTORS, available

N_CLASSES = 2
N_LANGUAGES = 2

# Extended class ordering: language-major, class-minor.
EXTENDED_ORDER = ((ENG, LEGIT), (ENG, FAKE), (SPA, LEGIT), (SPA, FAKE))

MONO = "mono"
MULTI = "multi"

SUM_TOL = 1e-6


@dataclass(frozen=True)
class Coverage:
    kind: str  # "mono" or "multi"
    language: str | None = None  # set for mono

    def __post_init__(self):
        if self.kind == MONO:
            if self.language not in (ENG, SPA):
                raise ValidationError(f"mono coverage needs a language, got {self.language!r}")
        elif self.kind == MULTI:
            if self.language is not None:
                raise ValidationError("multi coverage has no single language")
        else:
            raise ValidationError(f"unknown coverage kind {self.kind!r}")

    def tag(self) -> str:
        return self.kind if self.kind == MULTI else f"{MONO}:{self.language}"


def mono(language: str) -> Coverage:
    return Coverage(MONO, language)


def multi() -> Coverage:
    return Coverage(MULTI)


_CORPUS_COVERAGE = {ESP_FAKE: mono(SPA), KAGGLE: mono(ENG), MIXED: multi()}
_CHECKPOINT_COVERAGE = {BERT_ENG: mono(ENG), BERT_SPA: mono(SPA), BERT_MULT: multi()}


def member_coverage(extractor: str, train_corpus: str) -> Coverage:
    """Classical members take their training corpus coverage; embedding
    members take their checkpoint's coverage."""
    if extractor in DEEP_EXTRACTORS:
        return _CHECKPOINT_COVERAGE[extractor]
    return _CORPUS_COVERAGE[train_corpus]


def corpus_language(corpus_name: str) -> str | None:
    cov = _CORPUS_COVERAGE[corpus_name]
    return cov.language


def _check_support(values: np.ndarray, what: str) -> None:
    if np.any(values < -SUM_TOL):
        raise ValidationError(f"{what} has negative entries")
    sums = values.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > SUM_TOL):
        raise ValidationError(f"{what} does not sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.2e})")


def accumulate_internal(supports: np.ndarray) -> np.ndarray:
    """Arithmetic mean of base support vectors; shape (members, classes) -> (classes,)."""
    supports = np.asarray(supports, dtype=np.float64)
    if supports.ndim == 1:
        supports = supports[None, :]
    if supports.shape[0] == 0:
        raise ValidationError("cannot accumulate an empty support list")
    _check_support(supports, "base support")
    return supports.mean(axis=0)


def extend_support(support: np.ndarray, coverage: Coverage) -> np.ndarray:
    """Lift a base support vector into the extended language-class space."""
    support = np.asarray(support, dtype=np.float64)
    if support.shape != (N_CLASSES,):
        raise ValidationError(f"base support must have {N_CLASSES} entries, got {support.shape}")
    _check_support(support, "base support")
    extended = np.zeros(N_CLASSES * N_LANGUAGES, dtype=np.float64)
    if coverage.kind == MONO:
        block = 0 if coverage.language == ENG else 1
        extended[block * N_CLASSES : (block + 1) * N_CLASSES] = support
    else:
        replicated = support / N_LANGUAGES
        for block in range(N_LANGUAGES):
            extended[block * N_CLASSES : (block + 1) * N_CLASSES] = replicated
    return extended


def decode_extended(extended: np.ndarray) -> tuple[str, int]:
    """Argmax of an extended vector as (language, class); ties pick the lower index."""
    idx = int(np.argmax(extended))
    return EXTENDED_ORDER[idx][0], EXTENDED_ORDER[idx][1]


def marginalize_classes(extended: np.ndarray) -> np.ndarray:
    """Sum the language blocks per class, recovering a base-shaped vector."""
    extended = np.asarray(extended, dtype=np.float64)
    return extended.reshape(N_LANGUAGES, N_CLASSES).sum(axis=0)


def accumulate_external(extended_supports: np.ndarray) -> tuple[tuple[str, int], np.ndarray]:
    """Mean of extended supports plus the decoded (language, class) prediction."""
    extended_supports = np.asarray(extended_supports, dtype=np.float64)
    if extended_supports.ndim == 1:
        extended_supports = extended_supports[None, :]
    if extended_supports.shape[0] == 0:
        raise ValidationError("cannot accumulate an empty pool")
    if extended_supports.shape[1] != N_CLASSES * N_LANGUAGES:
        raise ValidationError("extended supports must have language x class entries")
    _check_support(extended_supports, "extended support")
    fused = extended_supports.mean(axis=0)
    return decode_extended(fused), fused


# ---------------------------------------------------------------------------
# Pools


@dataclass
class PoolMember:
    """One trained classifier plus the provenance needed to route its support."""

    extractor_ids: tuple[str, ...]  # one id for SIS members, several for ERS concat
    train_corpus: str
    coverage: Coverage
    model: mlp.MlpModel
    reducer: reduction.Reducer | None = None
    model_path: str | None = None
    reducer_path: str | None = None

    def support(self, X: np.ndarray) -> np.ndarray:
        if self.reducer is not None:
            X = reduction.apply(self.reducer, np.asarray(X, dtype=np.float64))
        return mlp.predict_support(self.model, X)


@dataclass
class EnsemblePool:
    policy: str  # "sis" or "ers"
    eval_corpus: str
    members: list[PoolMember] = field(default_factory=list)

    def groups(self) -> dict[tuple[str, str], list[int]]:
        """Member indices grouped by (train_corpus, coverage tag)."""
        out: dict[tuple[str, str], list[int]] = {}
        for i, m in enumerate(self.members):
            out.setdefault((m.train_corpus, m.coverage.tag()), []).append(i)
        return out

    def predict(self, member_inputs: list[np.ndarray]):
        """Fuse member supports for one evaluation slice.

        `member_inputs[i]` is the feature matrix member i sees (same row
        order across members). Returns (classes, languages, fused) where
        `languages` is None for a single-group pool (the pool then carries
        no language information of its own).
        """
        if len(member_inputs) != len(self.members):
            raise ValidationError("one input matrix per pool member required")
        supports = [m.support(X) for m, X in zip(self.members, member_inputs)]
        n_rows = supports[0].shape[0]
        for s in supports:
            if s.shape[0] != n_rows:
                raise ValidationError("pool member inputs disagree on row count")
        groups = self.groups()
        group_means = {}
        for key, idxs in groups.items():
            stack = np.stack([supports[i] for i in idxs])
            _check_support(stack, "member support")
            group_means[key] = stack.mean(axis=0)
        if len(groups) == 1:
            fused = next(iter(group_means.values()))
            classes = np.argmax(fused, axis=1)
            return classes, None, fused
        extended = []
        for key, mean_support in group_means.items():
            cov = self.members[groups[key][0]].coverage
            extended.append(np.stack([extend_support(row, cov) for row in mean_support]))
        fused = np.stack(extended).mean(axis=0)
        _check_support(fused, "fused extended support")
        idx = np.argmax(fused, axis=1)
        classes = np.array([EXTENDED_ORDER[i][1] for i in idx], dtype=np.int64)
        languages = [EXTENDED_ORDER[i][0] for i in idx]
        return classes, languages, fused

    def marginal_classes(self, fused_extended: np.ndarray) -> np.ndarray:
        """Class decision for single-language evaluation: sum language blocks."""
        marginal = fused_extended.reshape(-1, N_LANGUAGES, N_CLASSES).sum(axis=1)
        return np.argmax(marginal, axis=1)

    def manifest(self) -> dict:
        return {
            "policy": self.policy,
            "eval_corpus": self.eval_corpus,
            "extended_order": [[lang, cls] for lang, cls in EXTENDED_ORDER],
            "members": [
                {
                    "extractors": list(m.extractor_ids),
                    "train_corpus": m.train_corpus,
                    "coverage": m.coverage.tag(),
                    "model_path": m.model_path,
                    "reducer_path": m.reducer_path,
                }
                for m in self.members
            ],
        }

    def save_manifest(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.manifest(), fh, sort_keys=True, indent=1)


@dataclass
class MemberData:
    """Training inputs for one prospective pool member."""

    extractor_id: str
    train_corpus: str
    X_train: np.ndarray
    y_train: np.ndarray
    seed: int | None = None  # overrides the pool-level MLP seed when set
    feature_source: str | None = None  # corpus the extractor was fitted on, if different


def _check_available(extractor: str, train_corpus: str, eval_corpus: str) -> None:
    if not available(extractor, train_corpus):
        raise ConfigError(f"extractor {extractor!r} is unavailable for corpus {train_corpus!r}")
    if not available(extractor, eval_corpus):
        raise ConfigError(f"extractor {extractor!r} is unavailable for corpus {eval_corpus!r}")


def build_sis(member_data: list[MemberData], eval_corpus: str, mlp_config: mlp.MlpConfig) -> EnsemblePool:
    """One classifier per (extractor, training corpus) on its own representation."""
    if not member_data:
        raise ValidationError("SIS pool needs at least one member")
    pool = EnsemblePool(policy="sis", eval_corpus=eval_corpus)
    for md in member_data:
        _check_available(md.extractor_id, md.feature_source or md.train_corpus, eval_corpus)
        cfg = mlp_config if md.seed is None else replace(mlp_config, seed=md.seed)
        model = mlp.train(md.X_train, md.y_train, cfg)
        pool.members.append(
            PoolMember(
                extractor_ids=(md.extractor_id,),
                train_corpus=md.train_corpus,
                coverage=member_coverage(md.extractor_id, md.train_corpus),
                model=model,
            )
        )
    return pool


@dataclass
class ConcatBlock:
    """Concatenated extractor features for one training corpus."""

    extractor_ids: tuple[str, ...]
    train_corpus: str
    X_train: np.ndarray  # already column-concatenated
    y_train: np.ndarray
    seed: int | None = None
    row_ids: tuple[str, ...] | None = None  # optional row-order audit handle


def build_ers(
    blocks: list[ConcatBlock],
    reducer_kind: str,
    eval_corpus: str,
    mlp_config: mlp.MlpConfig,
    target_dim: int = 100,
) -> EnsemblePool:
    """Per corpus: reduce the concatenated space, train one classifier."""
    if not blocks:
        raise ValidationError("ERS pool needs at least one corpus block")
    pool = EnsemblePool(policy="ers", eval_corpus=eval_corpus)
    for block in blocks:
        for e in block.extractor_ids:
            _check_available(e, block.train_corpus, eval_corpus)
        reducer = reduction.fit_reducer(reducer_kind, block.X_train, block.y_train, target_dim)
        reduced = reduction.apply(reducer, np.asarray(block.X_train, dtype=np.float64))
        cfg = mlp_config if block.seed is None else replace(mlp_config, seed=block.seed)
        model = mlp.train(reduced, block.y_train, cfg)
        # Mixed-trained ERS members cover both languages; single-corpus
        # members are monolingual regardless of which extractors fed the
        # concatenation (the classifier saw only that corpus's labels).
        pool.members.append(
            PoolMember(
                extractor_ids=tuple(block.extractor_ids),
                train_corpus=block.train_corpus,
                coverage=_CORPUS_COVERAGE[block.train_corpus],
                model=model,
                reducer=reducer,
            )
        )
    return pool


def concat_features(matrices: list[np.ndarray], row_ids_list: list[tuple[str, ...]] | None = None) -> np.ndarray:
    """Column-wise concatenation with a row-order audit across sources."""
    if row_ids_list is not None:
        first = row_ids_list[0]
        for ids in row_ids_list[1:]:
            if tuple(ids) != tuple(first):
                raise ValidationError("row-order mismatch across extractor matrices")
    arrays = [np.asarray(m, dtype=np.float64) for m in matrices]
    n = arrays[0].shape[0]
    for a in arrays:
        if a.shape[0] != n:
            raise ValidationError("row-count mismatch across extractor matrices")
    return np.concatenate(arrays, axis=1)
