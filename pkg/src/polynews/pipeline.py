"""End-to-end experiment orchestration.

A declarative JSON config drives ingest -> fold planning -> feature
extraction -> reduction -> training -> integration -> evaluation ->
reporting. Every intermediate artifact is persisted under a run directory
keyed by a hash of the canonical config, so re-running an identical config
replays from the stored artifacts and produces identical reports.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np

from . import ensemble, evaluation, mlp, reduction
from .corpus import (
    ATTRIBUTES,
    ATTR_TEXT,
    CORPUS_NAMES,
    ESP_FAKE,
    ESP_FAKE_CSV,
    KAGGLE,
    KAGGLE_CSV,
    LANG_CODES,
    MIXED,
    Corpus,
    FoldPlan,
    ingest,
    make_fold_plan,
    mix,
    normalize_corpus,
)
from .errors import ConfigError, StageError, ValidationError
from .extractors import (
    CLASSICAL_EXTRACTORS,
    DEEP_EXTRACTORS,
    EXTRACTORS,
    LDA,
    TFIDF,
    available,
    fit_lda,
    fit_tfidf,
    load_embeddings,
    save_labels,
    save_matrix,
    transform_lda,
    transform_tfidf,
)
from .extractors.matrix import FeatureMatrix, make_meta

EXPERIMENTS = ("E1", "E2", "E3", "E4", "HEATMAP")

SIS_SA = "sis_sa"
ERS_MINFO = "ers_minfo"
ERS_ANOVA = "ers_anova"
ERS_PCA = "ers_pca"
INTEGRATIONS = (SIS_SA, ERS_MINFO, ERS_ANOVA, ERS_PCA)
INTEGRATION_SHORT = {SIS_SA: "sa", ERS_MINFO: "minfo", ERS_ANOVA: "anova", ERS_PCA: "pca"}
REDUCER_FOR = {ERS_MINFO: reduction.MINFO, ERS_ANOVA: reduction.ANOVA, ERS_PCA: reduction.PCA}

WORKERS_ENV = "POLYNEWS_WORKERS"


@dataclass
class RunConfig:
    experiment: str
    datasets: list[str]
    attribute: str
    extractors: list[str]
    integrations: list[str]
    seed: int
    corpora_paths: dict[str, str]
    embeddings_dir: str | None
    output_dir: str
    sources: list[str] = field(default_factory=lambda: [ESP_FAKE, KAGGLE, MIXED])
    target_dim: int = 100
    e3_sa_mode: str = "pool"  # "pool" or "concat"
    tfidf_opts: dict = field(default_factory=dict)
    lda_opts: dict = field(default_factory=dict)
    mlp_opts: dict = field(default_factory=dict)

    def canonical(self) -> str:
        # output_dir is deliberately excluded: where results land does not
        # change what they are. Data paths do, so they participate in the hash.
        payload = {
            "experiment": self.experiment,
            "datasets": self.datasets,
            "attribute": self.attribute,
            "extractors": self.extractors,
            "integrations": self.integrations,
            "seed": self.seed,
            "sources": self.sources,
            "target_dim": self.target_dim,
            "e3_sa_mode": self.e3_sa_mode,
            "paths": {
                "corpora": {k: os.path.abspath(v) for k, v in sorted(self.corpora_paths.items())},
                "embeddings_dir": os.path.abspath(self.embeddings_dir) if self.embeddings_dir else None,
            },
            "tfidf": self.tfidf_opts,
            "lda": self.lda_opts,
            "mlp": self.mlp_opts,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]

    def mlp_config(self, seed: int) -> mlp.MlpConfig:
        opts = dict(self.mlp_opts)
        hidden = tuple(opts.pop("hidden", (500, 500)))
        return mlp.MlpConfig(hidden=hidden, seed=seed, **opts)


def load_config(path) -> RunConfig:
    """Parse a config JSON; relative paths resolve against the config's directory."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    root = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if p is None or os.path.isabs(p) else os.path.join(root, p)

    paths = raw.get("paths", {})
    integrations = raw.get("integrations", raw.get("integration"))
    if integrations is None:
        integrations = list(INTEGRATIONS) if raw.get("experiment") in ("E2", "E4") else []
    if isinstance(integrations, str):
        integrations = [integrations]
    return RunConfig(
        experiment=raw.get("experiment", ""),
        datasets=list(raw.get("datasets", [])),
        attribute=raw.get("attribute", ATTR_TEXT),
        extractors=list(raw.get("extractors", [])),
        integrations=list(integrations),
        seed=int(raw.get("seed", 0)),
        corpora_paths={k: resolve(v) for k, v in paths.get("corpora", {}).items()},
        embeddings_dir=resolve(paths.get("embeddings_dir")),
        output_dir=resolve(paths.get("output_dir", "runs")),
        sources=list(raw.get("sources", [ESP_FAKE, KAGGLE, MIXED])),
        target_dim=int(raw.get("target_dim", 100)),
        e3_sa_mode=raw.get("e3_sa_mode", "pool"),
        tfidf_opts=dict(raw.get("tfidf", {})),
        lda_opts=dict(raw.get("lda", {})),
        mlp_opts=dict(raw.get("mlp", {})),
    )


def _needed_corpora(cfg: RunConfig) -> list[str]:
    needed = set(cfg.datasets)
    if cfg.experiment in ("E3", "E4"):
        needed.update(cfg.sources)
    if cfg.experiment == "HEATMAP":
        needed.update(cfg.datasets)
    if MIXED in needed:
        needed.update((ESP_FAKE, KAGGLE))
    order = [c for c in (ESP_FAKE, KAGGLE, MIXED) if c in needed]
    return order


def embedding_file_name(extractor, source, target, attribute, rep, tune_fold, role) -> str:
    return f"{extractor}_{source}_{target}_{attribute}_r{rep}_t{tune_fold}_{role}.fmx1"


def heatmap_embedding_file_name(extractor, source, target, attribute) -> str:
    return f"{extractor}_{source}_{target}_{attribute}_full.fmx1"


def expected_embedding_files(cfg: RunConfig) -> list[dict]:
    """The embedding files a run will load, with their expected provenance.

    This is the interface contract with the embedding exporter: `file` is
    relative to the configured embeddings directory; train-role files hold
    the rows of the tuning fold, eval-role files the rows of the other
    fold, both from the checkpoint fine-tuned on (source, tuned_on_fold).
    """
    specs: list[dict] = []
    deep = [e for e in cfg.extractors if e in DEEP_EXTRACTORS]

    def add(e, s, t, role):
        for rep in range(5):
            for tune_fold in (0, 1):
                fold = tune_fold if role == "train" else 1 - tune_fold
                specs.append(
                    {
                        "file": embedding_file_name(e, s, t, cfg.attribute, rep, tune_fold, role),
                        "extractor": e,
                        "train_corpus": s,
                        "eval_corpus": t,
                        "attribute": cfg.attribute,
                        "repetition": rep,
                        "fold": fold,
                        "tuned_on_fold": tune_fold,
                        "role": role,
                    }
                )

    if cfg.experiment in ("E1", "E2"):
        for e in deep:
            for x in cfg.datasets:
                if available(e, x):
                    add(e, x, x, "train")
                    add(e, x, x, "eval")
    elif cfg.experiment == "E3":
        # classifiers train on the evaluation corpus in source feature spaces
        for e in deep:
            for x in cfg.datasets:
                if not available(e, x):
                    continue
                for s in cfg.sources:
                    if available(e, s):
                        add(e, s, x, "train")
                        add(e, s, x, "eval")
    elif cfg.experiment == "E4":
        # classifiers train on their source corpus, evaluate on the target
        for e in deep:
            for x in cfg.datasets:
                if not available(e, x):
                    continue
                for s in cfg.sources:
                    if available(e, s):
                        add(e, s, s, "train")
                        add(e, s, x, "eval")
    elif cfg.experiment == "HEATMAP":
        for e in deep:
            for s in cfg.datasets:
                for x in cfg.datasets:
                    if available(e, s) and available(e, x):
                        specs.append(
                            {
                                "file": heatmap_embedding_file_name(e, s, x, cfg.attribute),
                                "extractor": e,
                                "train_corpus": s,
                                "eval_corpus": x,
                                "attribute": cfg.attribute,
                                "repetition": -1,
                                "fold": -1,
                                "role": "full",
                            }
                        )

    seen: dict[str, dict] = {}
    for spec in specs:
        seen.setdefault(spec["file"], spec)
    return [seen[k] for k in sorted(seen)]


def validate(cfg: RunConfig) -> list[str]:
    """Human-readable config problems; empty when the config is runnable."""
    problems = []
    if cfg.experiment not in EXPERIMENTS:
        problems.append(f"unknown experiment {cfg.experiment!r}; expected one of {EXPERIMENTS}")
        return problems
    if cfg.attribute not in ATTRIBUTES:
        problems.append(f"unknown attribute {cfg.attribute!r}; expected one of {ATTRIBUTES}")
    if not cfg.datasets:
        problems.append("no datasets requested")
    for ds in cfg.datasets:
        if ds not in CORPUS_NAMES:
            problems.append(f"unknown dataset {ds!r}")
    for s in cfg.sources:
        if s not in CORPUS_NAMES:
            problems.append(f"unknown source corpus {s!r}")
    if not cfg.extractors:
        problems.append("no extractors requested")
    for e in cfg.extractors:
        if e not in EXTRACTORS:
            problems.append(f"unknown extractor {e!r}")
    for i in cfg.integrations:
        if i not in INTEGRATIONS:
            problems.append(f"unknown integration {i!r}")
    if cfg.experiment in ("E2", "E4") and not cfg.integrations:
        problems.append(f"{cfg.experiment} requires at least one integration method")
    if cfg.experiment == "E3" and len(cfg.integrations) != 1:
        problems.append("E3 requires exactly one integration method")
    if cfg.e3_sa_mode not in ("pool", "concat"):
        problems.append(f"unknown e3_sa_mode {cfg.e3_sa_mode!r}")
    if cfg.seed < 0:
        problems.append("seed must be non-negative")
    if cfg.target_dim < 1:
        problems.append("target_dim must be positive")

    known_ds = [d for d in cfg.datasets if d in CORPUS_NAMES]
    for e in cfg.extractors:
        if e in EXTRACTORS and known_ds and not any(available(e, ds) for ds in known_ds):
            problems.append(f"extractor unavailable for corpus: {e!r} cannot run on any of {known_ds}")

    for name in _needed_corpora(cfg):
        if name == MIXED:
            continue
        path = cfg.corpora_paths.get(name)
        if not path:
            problems.append(f"no corpus path configured for {name!r}")
        elif not os.path.exists(path):
            problems.append(f"corpus file missing for {name!r}: {path}")

    needs_embeddings = expected_embedding_files(cfg) if not problems else []
    if needs_embeddings:
        if not cfg.embeddings_dir:
            problems.append("config requests transformer embeddings but sets no embeddings_dir")
        else:
            missing = [
                spec["file"]
                for spec in needs_embeddings
                if not os.path.exists(os.path.join(cfg.embeddings_dir, spec["file"]))
            ]
            for f in missing[:10]:
                problems.append(f"embedding file missing: {f}")
            if len(missing) > 10:
                problems.append(f"... and {len(missing) - 10} more embedding files missing")
    return problems


# ---------------------------------------------------------------------------
# Deterministic per-purpose seeds


def derive_seed(base_seed: int, *parts) -> int:
    key = ":".join([str(base_seed), *map(str, parts)])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


# ---------------------------------------------------------------------------
# Feature provider: classical fit/transform with caching, deep file loading


class FeatureProvider:
    def __init__(self, cfg: RunConfig, corpora: dict[str, Corpus], positions, run_dir: str):
        self.cfg = cfg
        self.corpora = corpora  # normalized corpora by name
        self.positions = positions  # corpus name -> [(fold0_positions, fold1_positions)] per rep
        self.features_dir = os.path.join(run_dir, "features")
        os.makedirs(self.features_dir, exist_ok=True)
        self._fitted: dict = {}

    def fold_docs(self, corpus_name: str, rep: int, fold: int):
        corpus = self.corpora[corpus_name]
        pos = self.positions[corpus_name][rep][fold]
        return [corpus.documents[p] for p in pos]

    def fold_labels(self, corpus_name: str, rep: int, fold: int) -> np.ndarray:
        return np.array([d.label for d in self.fold_docs(corpus_name, rep, fold)], dtype=np.int64)

    def fold_languages(self, corpus_name: str, rep: int, fold: int) -> list[str]:
        return [d.language for d in self.fold_docs(corpus_name, rep, fold)]

    def _fit_classical(self, extractor: str, source: str, rep: int, tune_fold: int):
        key = (extractor, source, rep, tune_fold)
        if key in self._fitted:
            return self._fitted[key]
        docs = self.fold_docs(source, rep, tune_fold)
        if extractor == TFIDF:
            model = fit_tfidf(docs, self.cfg.attribute, **{"max_features": 100, **self.cfg.tfidf_opts})
        elif extractor == LDA:
            seed = derive_seed(self.cfg.seed, "lda", source, rep, tune_fold, self.cfg.attribute)
            model = fit_lda(docs, self.cfg.attribute, seed=seed, **self.cfg.lda_opts)
        else:
            raise ConfigError(f"{extractor!r} is not a classical extractor")
        self._fitted[key] = model
        return model

    def matrix(self, extractor: str, source: str, target: str, rep: int, tune_fold: int, fold: int) -> FeatureMatrix:
        """Features of `target`'s fold `fold` in the space of `extractor`
        fitted on `source`'s fold `tune_fold` (repetition `rep`)."""
        role = "train" if fold == tune_fold else "eval"
        docs = self.fold_docs(target, rep, fold)
        doc_ids = [d.id for d in docs]
        meta = make_meta(
            extractor,
            train_corpus=source,
            eval_corpus=target,
            attribute=self.cfg.attribute,
            repetition=rep,
            fold=fold,
            tuned_on_fold=tune_fold,
            doc_ids_sha256=ids_sha256(doc_ids),
        )
        if extractor in DEEP_EXTRACTORS:
            path = os.path.join(
                self.cfg.embeddings_dir or "",
                embedding_file_name(extractor, source, target, self.cfg.attribute, rep, tune_fold, role),
            )
            expected = {
                "extractor": extractor,
                "train_corpus": source,
                "eval_corpus": target,
                "attribute": self.cfg.attribute,
                "repetition": rep,
                "fold": fold,
            }
            fm = load_embeddings(path, expected_meta=expected)
            if fm.n_rows != len(docs):
                raise ValidationError(
                    f"{path}: row count {fm.n_rows} does not match fold size {len(docs)}"
                )
            stored = fm.meta.get("doc_ids_sha256")
            if stored is not None and stored != meta["doc_ids_sha256"]:
                raise ValidationError(f"{path}: document id checksum does not match the fold plan")
            return fm
        model = self._fit_classical(extractor, source, rep, tune_fold)
        transform = transform_tfidf if extractor == TFIDF else transform_lda
        fm = transform(model, docs, self.cfg.attribute, meta=meta)
        fname = embedding_file_name(extractor, source, target, self.cfg.attribute, rep, tune_fold, role)
        fpath = os.path.join(self.features_dir, fname)
        if not os.path.exists(fpath):
            save_matrix(fm, fpath)
            save_labels(
                fpath.replace(".fmx1", ".lbl1"),
                np.array([d.label for d in docs], dtype=np.uint8),
                np.array([LANG_CODES[d.language] for d in docs], dtype=np.uint8),
            )
        return fm


def ids_sha256(doc_ids) -> str:
    return hashlib.sha256("\n".join(doc_ids).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Cell evaluation


@dataclass
class CellSpec:
    dataset: str
    method: str  # column label (extractor id or integration short name)
    experiment: str
    extractors: list[str] = field(default_factory=list)
    sources: list[str] = field(default_factory=list)
    integration: str | None = None


def _member_extractors(extractors, corpus_a, corpus_b=None):
    out = []
    for e in extractors:
        if not available(e, corpus_a):
            continue
        if corpus_b is not None and not available(e, corpus_b):
            continue
        out.append(e)
    return out


def _evaluate_slot(provider: FeatureProvider, cell: CellSpec, rep: int, tune_fold: int, run_dir: str):
    """Train and score one (repetition, training fold) slot of a cell."""
    cfg = provider.cfg
    x = cell.dataset
    eval_fold = 1 - tune_fold
    y_train_x = provider.fold_labels(x, rep, tune_fold)
    y_eval = provider.fold_labels(x, rep, eval_fold)
    langs_eval = provider.fold_languages(x, rep, eval_fold)

    def mlp_cfg(tag):
        return cfg.mlp_config(derive_seed(cfg.seed, "mlp", cell.dataset, cell.method, rep, tune_fold, tag))

    def member_seed(*parts):
        return derive_seed(cfg.seed, "mlp", cell.dataset, cell.method, rep, tune_fold, *parts)

    pool = None
    member_eval = []

    if cell.experiment in ("E1", "E2") and cell.integration in (None, SIS_SA):
        members = []
        for e in cell.extractors:
            fm = provider.matrix(e, x, x, rep, tune_fold, tune_fold)
            members.append(
                ensemble.MemberData(
                    extractor_id=e,
                    train_corpus=x,
                    X_train=fm.values.astype(np.float64),
                    y_train=y_train_x,
                    seed=member_seed(e, x),
                )
            )
        pool = ensemble.build_sis(members, x, mlp_cfg("sis"))
        member_eval = [
            provider.matrix(e, x, x, rep, tune_fold, eval_fold).values.astype(np.float64)
            for e in cell.extractors
        ]
    elif cell.experiment == "E2":
        reducer_kind = REDUCER_FOR[cell.integration]
        train_parts = [
            provider.matrix(e, x, x, rep, tune_fold, tune_fold).values.astype(np.float64)
            for e in cell.extractors
        ]
        block = ensemble.ConcatBlock(
            extractor_ids=tuple(cell.extractors),
            train_corpus=x,
            X_train=ensemble.concat_features(train_parts),
            y_train=y_train_x,
            seed=member_seed(x),
        )
        pool = ensemble.build_ers([block], reducer_kind, x, mlp_cfg("ers"), cfg.target_dim)
        eval_parts = [
            provider.matrix(e, x, x, rep, tune_fold, eval_fold).values.astype(np.float64)
            for e in cell.extractors
        ]
        member_eval = [ensemble.concat_features(eval_parts)]
    elif cell.experiment == "E3":
        e = cell.extractors[0]
        sources = cell.sources
        if cell.integration == SIS_SA and cfg.e3_sa_mode == "pool":
            members = [
                ensemble.MemberData(
                    extractor_id=e,
                    train_corpus=x,
                    X_train=provider.matrix(e, s, x, rep, tune_fold, tune_fold).values.astype(np.float64),
                    y_train=y_train_x,
                    seed=member_seed(e, s),
                    feature_source=s,
                )
                for s in sources
            ]
            pool = ensemble.build_sis(members, x, mlp_cfg("e3"))
            member_eval = [
                provider.matrix(e, s, x, rep, tune_fold, eval_fold).values.astype(np.float64)
                for s in sources
            ]
        else:
            train_parts = [
                provider.matrix(e, s, x, rep, tune_fold, tune_fold).values.astype(np.float64)
                for s in sources
            ]
            if cell.integration == SIS_SA:
                reducer_kind = reduction.SA_PASSTHROUGH
            else:
                reducer_kind = REDUCER_FOR[cell.integration]
            block = ensemble.ConcatBlock(
                extractor_ids=tuple([e] * len(sources)),
                train_corpus=x,
                X_train=ensemble.concat_features(train_parts),
                y_train=y_train_x,
                seed=member_seed(e, x),
            )
            pool = ensemble.build_ers([block], reducer_kind, x, mlp_cfg("e3"), cfg.target_dim)
            eval_parts = [
                provider.matrix(e, s, x, rep, tune_fold, eval_fold).values.astype(np.float64)
                for s in sources
            ]
            member_eval = [ensemble.concat_features(eval_parts)]
    elif cell.experiment == "E4" and cell.integration == SIS_SA:
        members, member_eval = [], []
        for s in cell.sources:
            for e in _member_extractors(cell.extractors, s, x):
                members.append(
                    ensemble.MemberData(
                        extractor_id=e,
                        train_corpus=s,
                        X_train=provider.matrix(e, s, s, rep, tune_fold, tune_fold).values.astype(np.float64),
                        y_train=provider.fold_labels(s, rep, tune_fold),
                        seed=member_seed(e, s),
                    )
                )
                member_eval.append(
                    provider.matrix(e, s, x, rep, tune_fold, eval_fold).values.astype(np.float64)
                )
        if not members:
            raise ConfigError(f"no available (extractor, source) pairs for {x}")
        pool = ensemble.build_sis(members, x, mlp_cfg("e4"))
    elif cell.experiment == "E4":
        reducer_kind = REDUCER_FOR[cell.integration]
        blocks, member_eval = [], []
        for s in cell.sources:
            exts = _member_extractors(cell.extractors, s, x)
            if not exts:
                continue
            train_parts = [
                provider.matrix(e, s, s, rep, tune_fold, tune_fold).values.astype(np.float64) for e in exts
            ]
            blocks.append(
                ensemble.ConcatBlock(
                    extractor_ids=tuple(exts),
                    train_corpus=s,
                    X_train=ensemble.concat_features(train_parts),
                    y_train=provider.fold_labels(s, rep, tune_fold),
                    seed=member_seed(s),
                )
            )
            eval_parts = [
                provider.matrix(e, s, x, rep, tune_fold, eval_fold).values.astype(np.float64) for e in exts
            ]
            member_eval.append(ensemble.concat_features(eval_parts))
        if not blocks:
            raise ConfigError(f"no available (extractor, source) pairs for {x}")
        pool = ensemble.build_ers(blocks, reducer_kind, x, mlp_cfg("e4"), cfg.target_dim)
    else:
        raise ConfigError(f"unsupported cell {cell.experiment}/{cell.integration}")

    classes, languages, fused = pool.predict(member_eval)
    if x == MIXED:
        score = evaluation.mixed_balanced_accuracy(y_eval, langs_eval, classes, languages)
        metric = "mixed_balanced_accuracy"
    else:
        if languages is not None:
            classes = pool.marginal_classes(fused)
        score = evaluation.balanced_accuracy(y_eval, classes, classes=(0, 1))
        metric = "balanced_accuracy"

    # persist per-slot artifacts: models, reducers, pool manifest
    pools_dir = os.path.join(run_dir, "pools")
    models_dir = os.path.join(run_dir, "models")
    os.makedirs(pools_dir, exist_ok=True)
    os.makedirs(models_dir, exist_ok=True)
    slot_tag = f"{cell.dataset}__{cell.method}__r{rep}_t{tune_fold}"
    for i, member in enumerate(pool.members):
        mpath = os.path.join(models_dir, f"{slot_tag}__m{i}.mlp")
        mlp.save_model(member.model, mpath)
        member.model_path = mpath
        if member.reducer is not None:
            rpath = os.path.join(models_dir, f"{slot_tag}__m{i}.reducer.json")
            member.reducer.save(rpath)
            member.reducer_path = rpath
    pool.save_manifest(os.path.join(pools_dir, f"{slot_tag}.json"))
    return score, metric


_SLOT_CONTEXT: dict = {}


def _run_slot_task(args):
    cell_idx, rep, tune_fold = args
    provider = _SLOT_CONTEXT["provider"]
    cells = _SLOT_CONTEXT["cells"]
    run_dir = _SLOT_CONTEXT["run_dir"]
    score, metric = _evaluate_slot(provider, cells[cell_idx], rep, tune_fold, run_dir)
    return cell_idx, rep, tune_fold, score, metric


def _resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else 1


def _cells_for(cfg: RunConfig) -> tuple[list[CellSpec], list[str]]:
    cells: list[CellSpec] = []
    if cfg.experiment == "E1":
        methods = list(cfg.extractors)
        for ds in cfg.datasets:
            for e in cfg.extractors:
                if available(e, ds):
                    cells.append(CellSpec(ds, e, "E1", extractors=[e]))
    elif cfg.experiment == "E2":
        methods = [INTEGRATION_SHORT[i] for i in cfg.integrations]
        for ds in cfg.datasets:
            exts = _member_extractors(cfg.extractors, ds)
            if not exts:
                continue
            for integ in cfg.integrations:
                cells.append(
                    CellSpec(ds, INTEGRATION_SHORT[integ], "E2", extractors=exts, integration=integ)
                )
    elif cfg.experiment == "E3":
        methods = list(cfg.extractors)
        integ = cfg.integrations[0]
        for ds in cfg.datasets:
            for e in cfg.extractors:
                if not available(e, ds):
                    continue
                sources = [s for s in cfg.sources if available(e, s)]
                if not sources:
                    continue
                cells.append(
                    CellSpec(ds, e, "E3", extractors=[e], sources=sources, integration=integ)
                )
    elif cfg.experiment == "E4":
        methods = [INTEGRATION_SHORT[i] for i in cfg.integrations]
        for ds in cfg.datasets:
            for integ in cfg.integrations:
                cells.append(
                    CellSpec(
                        ds,
                        INTEGRATION_SHORT[integ],
                        "E4",
                        extractors=list(cfg.extractors),
                        sources=list(cfg.sources),
                        integration=integ,
                    )
                )
    else:
        raise ConfigError(f"experiment {cfg.experiment} has no evaluation cells")
    return cells, methods


@dataclass
class RunResult:
    run_dir: str
    report_paths: dict
    cells: dict


def prepare_corpora(cfg: RunConfig) -> dict[str, Corpus]:
    corpora: dict[str, Corpus] = {}
    needed = _needed_corpora(cfg)
    if ESP_FAKE in needed:
        corpora[ESP_FAKE] = ingest(cfg.corpora_paths[ESP_FAKE], ESP_FAKE_CSV)
    if KAGGLE in needed:
        corpora[KAGGLE] = ingest(cfg.corpora_paths[KAGGLE], KAGGLE_CSV)
    if MIXED in needed:
        corpora[MIXED] = mix(corpora[ESP_FAKE], corpora[KAGGLE])
    return {name: normalize_corpus(c) for name, c in corpora.items() if name in needed}


def run(cfg: RunConfig, workers: int | None = None) -> RunResult:
    problems = validate(cfg)
    if problems:
        raise ConfigError("invalid configuration:\n" + "\n".join(f"- {p}" for p in problems))

    run_dir = os.path.join(cfg.output_dir, f"run_{cfg.config_hash()}")
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(cfg.canonical())

    stage = "ingest"
    try:
        corpora = prepare_corpora(cfg)
        ingest_report = {
            name: c.ingest_report.as_dict() for name, c in corpora.items() if c.ingest_report
        }
        with open(os.path.join(run_dir, "ingest_report.json"), "w", encoding="utf-8") as fh:
            json.dump(ingest_report, fh, sort_keys=True, indent=1)
    except Exception as exc:
        raise StageError(stage, run_dir, exc) from exc

    stage = "foldplan"
    plans_dir = os.path.join(run_dir, "foldplans")
    os.makedirs(plans_dir, exist_ok=True)
    positions = {}
    try:
        if cfg.experiment == "HEATMAP":
            plans = {}
        else:
            plans = {name: make_fold_plan(c, cfg.seed) for name, c in corpora.items()}
            for name, plan in plans.items():
                plan.save(os.path.join(plans_dir, f"{name}.json"))
                positions[name] = plan.fold_positions(corpora[name])
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, plans_dir, exc) from exc

    provider = FeatureProvider(cfg, corpora, positions, run_dir)

    if cfg.experiment == "HEATMAP":
        return _run_heatmap(cfg, provider, run_dir)

    stage = "evaluate"
    scores_dir = os.path.join(run_dir, "scores")
    os.makedirs(scores_dir, exist_ok=True)
    cells, methods = _cells_for(cfg)
    sheets: dict[tuple[str, str], evaluation.ScoreSheet] = {}
    pending: list[tuple[int, int, int]] = []
    cell_scores: dict[int, np.ndarray] = {}
    cell_metric: dict[int, str] = {}
    try:
        for idx, cell in enumerate(cells):
            spath = os.path.join(scores_dir, f"{cell.dataset}__{cell.method}.json")
            if os.path.exists(spath):
                with open(spath, "r", encoding="utf-8") as fh:
                    sheets[(cell.dataset, cell.method)] = evaluation.ScoreSheet.from_dict(json.load(fh))
                continue
            cell_scores[idx] = np.zeros((5, 2))
            for rep in range(5):
                for tune_fold in (0, 1):
                    pending.append((idx, rep, tune_fold))

        n_workers = _resolve_workers(workers)
        _SLOT_CONTEXT.update(provider=provider, cells=cells, run_dir=run_dir)
        try:
            if n_workers > 1 and len(pending) > 1:
                ctx = multiprocessing.get_context("fork")
                with concurrent.futures.ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as ex:
                    results = list(ex.map(_run_slot_task, pending))
            else:
                results = [_run_slot_task(args) for args in pending]
        finally:
            _SLOT_CONTEXT.clear()

        for idx, rep, tune_fold, score, metric in results:
            cell_scores[idx][rep, 1 - tune_fold] = score
            cell_metric[idx] = metric
        for idx, grid in cell_scores.items():
            cell = cells[idx]
            sheet = evaluation.ScoreSheet(
                method=cell.method, scores=grid, dataset=cell.dataset, metric=cell_metric[idx]
            )
            sheets[(cell.dataset, cell.method)] = sheet
            spath = os.path.join(scores_dir, f"{cell.dataset}__{cell.method}.json")
            tmp = f"{spath}.tmp.{os.getpid()}"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(sheet.as_dict(), fh, sort_keys=True)
            os.replace(tmp, spath)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, scores_dir, exc) from exc

    stage = "report"
    try:
        report = evaluation.render_report(sheets, cfg.datasets, methods)
        report_paths = evaluation.save_report(report, os.path.join(run_dir, "report"))
    except Exception as exc:
        raise StageError(stage, os.path.join(run_dir, "report"), exc) from exc

    return RunResult(run_dir=run_dir, report_paths=report_paths, cells=sheets)


def _run_heatmap(cfg: RunConfig, provider: FeatureProvider, run_dir: str) -> RunResult:
    stage = "heatmap"
    heat_dir = os.path.join(run_dir, "heatmaps")
    os.makedirs(heat_dir, exist_ok=True)
    index = []
    try:
        for e in cfg.extractors:
            for source in cfg.datasets:
                if not available(e, source):
                    continue
                model = None
                if e in CLASSICAL_EXTRACTORS:
                    docs = provider.corpora[source].documents
                    if e == TFIDF:
                        model = fit_tfidf(docs, cfg.attribute, **{"max_features": 100, **cfg.tfidf_opts})
                    else:
                        model = fit_lda(
                            docs,
                            cfg.attribute,
                            seed=derive_seed(cfg.seed, "lda", source, "full", cfg.attribute),
                            **cfg.lda_opts,
                        )
                for target in cfg.datasets:
                    if not available(e, target):
                        continue
                    if e in DEEP_EXTRACTORS:
                        path = os.path.join(
                            cfg.embeddings_dir or "",
                            heatmap_embedding_file_name(e, source, target, cfg.attribute),
                        )
                        if not os.path.exists(path):
                            index.append({"extractor": e, "train": source, "eval": target, "status": "missing"})
                            continue
                        fm = load_embeddings(path, expected_meta={"extractor": e})
                    else:
                        transform = transform_tfidf if e == TFIDF else transform_lda
                        fm = transform(model, provider.corpora[target].documents, cfg.attribute)
                    vector = evaluation.average_feature_vector(fm)
                    name = evaluation.heatmap_csv_name(e, source, target)
                    evaluation.write_heatmap_csv(os.path.join(heat_dir, name), vector)
                    index.append({"extractor": e, "train": source, "eval": target, "file": name})
        with open(os.path.join(heat_dir, "index.json"), "w", encoding="utf-8") as fh:
            json.dump(index, fh, sort_keys=True, indent=1)
    except Exception as exc:
        raise StageError(stage, heat_dir, exc) from exc
    return RunResult(run_dir=run_dir, report_paths={"heatmaps": heat_dir}, cells={})


def rerender_report(run_dir: str) -> dict:
    """Rebuild report files from the persisted score sheets of a run."""
    scores_dir = os.path.join(run_dir, "scores")
    if not os.path.isdir(scores_dir):
        raise ConfigError(f"{run_dir} has no scores directory")
    with open(os.path.join(run_dir, "config.json"), "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    sheets = {}
    for fname in sorted(os.listdir(scores_dir)):
        if not fname.endswith(".json"):
            continue
        with open(os.path.join(scores_dir, fname), "r", encoding="utf-8") as fh:
            sheet = evaluation.ScoreSheet.from_dict(json.load(fh))
        sheets[(sheet.dataset, sheet.method)] = sheet
    datasets = [d for d in raw["datasets"] if any(k[0] == d for k in sheets)]
    if raw["experiment"] in ("E1", "E3"):
        methods = [e for e in raw["extractors"]]
    else:
        methods = [INTEGRATION_SHORT[i] for i in raw["integrations"]]
    report = evaluation.render_report(sheets, datasets, methods)
    return evaluation.save_report(report, os.path.join(run_dir, "report"))
