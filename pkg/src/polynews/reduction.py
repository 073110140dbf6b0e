"""Attribute selection and projection: mutual information, ANOVA F, PCA."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import accel
from .errors import ValidationError
from .extractors.matrix import FeatureMatrix

MINFO = "minfo"
ANOVA = "anova"
PCA = "pca"
SA_PASSTHROUGH = "sa_passthrough"
REDUCER_KINDS = (MINFO, ANOVA, PCA, SA_PASSTHROUGH)

MI_BINS = 20


@dataclass
class Reducer:
    kind: str
    target_dim: int
    n_input_cols: int
    selected: np.ndarray | None = None  # MINFO / ANOVA column indices, in rank order
    scores: np.ndarray | None = None
    mean: np.ndarray | None = None  # PCA
    components: np.ndarray | None = None  # PCA, (k, n_input_cols)
    explained_variance: np.ndarray | None = field(default=None)

    def to_json_dict(self) -> dict:
        d = {"kind": self.kind, "target_dim": self.target_dim, "n_input_cols": self.n_input_cols}
        if self.selected is not None:
            d["selected"] = self.selected.tolist()
        if self.scores is not None:
            d["scores"] = self.scores.tolist()
        if self.mean is not None:
            d["mean"] = self.mean.tolist()
        if self.components is not None:
            d["components"] = self.components.tolist()
        if self.explained_variance is not None:
            d["explained_variance"] = self.explained_variance.tolist()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "Reducer":
        def arr(key, dtype=np.float64):
            return np.array(d[key], dtype=dtype) if key in d else None

        return cls(
            kind=d["kind"],
            target_dim=int(d["target_dim"]),
            n_input_cols=int(d["n_input_cols"]),
            selected=arr("selected", np.int64),
            scores=arr("scores"),
            mean=arr("mean"),
            components=arr("components"),
            explained_variance=arr("explained_variance"),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Reducer":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def _values(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return np.asarray(X.values, dtype=np.float64)
    return np.asarray(X, dtype=np.float64)


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise ValidationError("need at least 2 classes to fit a supervised reducer")
    return y


def fit_minfo(X, y, target_dim: int = 100) -> Reducer:
    """Rank columns by binned mutual information with the labels.

    Columns are discretized into 20 equal-frequency bins; MI is the plug-in
    estimate in nats. Ties rank the lower column index first.
    """
    values = _values(X)
    y = _check_labels(y)
    if values.shape[0] != y.shape[0] or values.shape[0] < 2:
        raise ValidationError("X rows must match labels and be >= 2")
    scores = accel.binned_mutual_information(values, y, MI_BINS)
    order = np.argsort(-scores, kind="stable")
    k = min(target_dim, values.shape[1])
    return Reducer(
        kind=MINFO,
        target_dim=target_dim,
        n_input_cols=values.shape[1],
        selected=order[:k].astype(np.int64),
        scores=scores,
    )


def anova_f_scores(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One-way F statistic per column: between-class MS over within-class MS.

    Zero within-class variance yields +inf when class means differ and 0.0
    when they do not.
    """
    classes = np.unique(y)
    n = values.shape[0]
    k = classes.size
    if n - k <= 0:
        raise ValidationError("ANOVA needs at least one more sample than classes")
    overall = values.mean(axis=0)
    ss_between = np.zeros(values.shape[1])
    ss_within = np.zeros(values.shape[1])
    for c in classes:
        block = values[y == c]
        if block.shape[0] < 2:
            raise ValidationError("each class needs >= 2 samples for ANOVA")
        mean_c = block.mean(axis=0)
        ss_between += block.shape[0] * (mean_c - overall) ** 2
        ss_within += ((block - mean_c) ** 2).sum(axis=0)
    ms_between = ss_between / (k - 1)
    ms_within = ss_within / (n - k)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = ms_between / ms_within
    f[(ms_within == 0.0) & (ms_between > 0.0)] = np.inf
    f[(ms_within == 0.0) & (ms_between == 0.0)] = 0.0
    return f


def fit_anova(X, y, target_dim: int = 100) -> Reducer:
    values = _values(X)
    y = _check_labels(y)
    scores = anova_f_scores(values, y)
    order = np.argsort(-scores, kind="stable")
    k = min(target_dim, values.shape[1])
    return Reducer(
        kind=ANOVA,
        target_dim=target_dim,
        n_input_cols=values.shape[1],
        selected=order[:k].astype(np.int64),
        scores=scores,
    )


def fit_pca(X, target_dim: int = 100) -> Reducer:
    """Centered SVD projection onto the top right singular vectors.

    Sign convention: the largest-magnitude entry of each component is
    positive. target_dim beyond min(rows - 1, cols) is clamped with a
    warning.
    """
    values = _values(X)
    n, m = values.shape
    if n < 2:
        raise ValidationError("PCA needs at least 2 rows")
    rank_cap = min(n - 1, m)
    k = target_dim
    if k > rank_cap:
        warnings.warn(
            f"PCA target_dim {target_dim} exceeds min(rows-1, cols)={rank_cap}; clamping",
            stacklevel=2,
        )
        k = rank_cap
    mean = values.mean(axis=0)
    centered = values - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    explained = (s[:k] ** 2) / (n - 1)
    return Reducer(
        kind=PCA,
        target_dim=target_dim,
        n_input_cols=m,
        mean=mean,
        components=components,
        explained_variance=explained,
    )


def passthrough(n_input_cols: int) -> Reducer:
    return Reducer(kind=SA_PASSTHROUGH, target_dim=n_input_cols, n_input_cols=n_input_cols)


def fit_reducer(kind: str, X, y=None, target_dim: int = 100) -> Reducer:
    if kind == MINFO:
        return fit_minfo(X, y, target_dim)
    if kind == ANOVA:
        return fit_anova(X, y, target_dim)
    if kind == PCA:
        return fit_pca(X, target_dim)
    if kind == SA_PASSTHROUGH:
        return passthrough(_values(X).shape[1])
    raise ValidationError(f"unknown reducer kind {kind!r}")


def apply(reducer: Reducer, X):
    """Transform `X` with a fitted reducer.

    FeatureMatrix in, FeatureMatrix out (provenance gains reducer info);
    plain arrays pass through as arrays.
    """
    values = _values(X)
    if values.shape[1] != reducer.n_input_cols:
        raise ValidationError(
            f"column count mismatch: reducer fitted on {reducer.n_input_cols}, got {values.shape[1]}"
        )
    if reducer.kind == SA_PASSTHROUGH:
        out = values
    elif reducer.kind in (MINFO, ANOVA):
        out = values[:, reducer.selected]
    elif reducer.kind == PCA:
        out = (values - reducer.mean) @ reducer.components.T
    else:
        raise ValidationError(f"unknown reducer kind {reducer.kind!r}")
    if isinstance(X, FeatureMatrix):
        meta = dict(X.meta)
        meta.update({"reducer": reducer.kind, "target_dim": reducer.target_dim})
        return FeatureMatrix(values=out.astype(np.float32), meta=meta)
    return out
