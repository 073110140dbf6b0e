"""Balanced accuracy, the 5x2cv combined F test, and report rendering."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .extractors.matrix import FeatureMatrix

ALPHA = 0.05
F_DF_NUM = 10
F_DF_DEN = 5

VERDICT_SIGNIFICANT = "significant"
VERDICT_NOT_SIGNIFICANT = "not significant"
VERDICT_NO_DIFFERENCE = "no difference"
VERDICT_SIGNIFICANT_DEGENERATE = "significant (degenerate)"


def balanced_accuracy(y_true, y_pred, classes=(0, 1)) -> float:
    """Mean per-class recall.

    Classes listed in `classes` but absent from `y_true` are excluded from
    the mean with a warning; a true class missing from `classes` is an
    error.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise ValidationError("balanced accuracy of an empty sample is undefined")
    if y_true.shape != y_pred.shape:
        raise ValidationError("y_true and y_pred must have the same length")
    present = set(np.unique(y_true).tolist())
    declared = set(classes)
    stray = present - declared
    if stray:
        raise ValidationError(f"true classes {sorted(stray)} not in declared classes {sorted(declared)}")
    absent = declared - present
    if absent:
        warnings.warn(f"classes {sorted(absent)} absent from y_true; excluded from the mean", stacklevel=2)
    recalls = []
    for c in sorted(present):
        mask = y_true == c
        recalls.append(float((y_pred[mask] == c).mean()))
    return float(np.mean(recalls))


def mixed_balanced_accuracy(y_true_class, y_true_lang, y_pred_class, y_pred_lang=None) -> float:
    """Balanced accuracy over the (language x class) strata.

    Strata come from the true labels. A prediction counts as a hit when the
    class matches and, if language predictions are supplied (decoded from
    extended supports), the language matches too.
    """
    y_true_class = np.asarray(y_true_class)
    y_pred_class = np.asarray(y_pred_class)
    y_true_lang = np.asarray(y_true_lang)
    if y_true_class.size == 0:
        raise ValidationError("balanced accuracy of an empty sample is undefined")
    if y_pred_lang is not None:
        y_pred_lang = np.asarray(y_pred_lang)
    hits = y_pred_class == y_true_class
    if y_pred_lang is not None:
        hits = hits & (y_pred_lang == y_true_lang)
    recalls = []
    strata = sorted({(l, c) for l, c in zip(y_true_lang.tolist(), y_true_class.tolist())})
    for lang, cls in strata:
        mask = (y_true_lang == lang) & (y_true_class == cls)
        recalls.append(float(hits[mask].mean()))
    return float(np.mean(recalls))


# ---------------------------------------------------------------------------
# Regularized incomplete beta via Lentz continued fractions, and the
# F(10, 5) survival function built on it.

_CF_TOL = 1e-13
_CF_MAX_ITERS = 400
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITERS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_survival(f: float, df_num: int = F_DF_NUM, df_den: int = F_DF_DEN) -> float:
    """P(F >= f) for the F distribution; 1.0 at f = 0, decreasing in f."""
    if f <= 0.0:
        return 1.0
    x = df_den / (df_den + df_num * f)
    return betainc_reg(df_den / 2.0, df_num / 2.0, x)


@dataclass
class ScoreSheet:
    """Per-(repetition, fold) balanced accuracies for one method on one dataset."""

    method: str
    scores: np.ndarray  # shape (5, 2)
    dataset: str = ""
    metric: str = "balanced_accuracy"

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (5, 2):
            raise ValidationError(f"score sheet must be 5x2, got {self.scores.shape}")
        if np.any((self.scores < 0.0) | (self.scores > 1.0)):
            raise ValidationError("balanced accuracies must lie in [0, 1]")

    def mean(self) -> float:
        return float(self.scores.mean())

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "metric": self.metric,
            "scores": self.scores.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreSheet":
        return cls(
            method=d["method"],
            scores=np.array(d["scores"]),
            dataset=d.get("dataset", ""),
            metric=d.get("metric", "balanced_accuracy"),
        )


@dataclass
class FTestResult:
    f: float
    p: float
    verdict: str

    @property
    def significant(self) -> bool:
        return self.verdict in (VERDICT_SIGNIFICANT, VERDICT_SIGNIFICANT_DEGENERATE)


def combined_f_test(a: ScoreSheet, b: ScoreSheet) -> FTestResult:
    """5x2cv combined F test between two score sheets from the same fold plan.

    With per-cell differences p_i^(j), fold means p_bar_i and per-repetition
    variances s_i^2 = (p_i^(1) - p_bar_i)^2 + (p_i^(2) - p_bar_i)^2, the
    statistic sum(p^2) / (2 sum(s^2)) follows F(10, 5).
    """
    diffs = a.scores - b.scores
    rep_means = diffs.mean(axis=1, keepdims=True)
    s2 = ((diffs - rep_means) ** 2).sum(axis=1)
    numerator = float((diffs**2).sum())
    denominator = 2.0 * float(s2.sum())
    if denominator == 0.0:
        if numerator == 0.0:
            return FTestResult(f=0.0, p=1.0, verdict=VERDICT_NO_DIFFERENCE)
        return FTestResult(f=float("inf"), p=0.0, verdict=VERDICT_SIGNIFICANT_DEGENERATE)
    f = numerator / denominator
    p = f_survival(f)
    verdict = VERDICT_SIGNIFICANT if p < ALPHA else VERDICT_NOT_SIGNIFICANT
    return FTestResult(f=f, p=p, verdict=verdict)


def significance_matrix(sheets: list[ScoreSheet]) -> dict:
    """All pairwise combined F tests among `sheets` (verdicts are symmetric)."""
    pairs = []
    for i in range(len(sheets)):
        for j in range(i + 1, len(sheets)):
            res = combined_f_test(sheets[i], sheets[j])
            pairs.append(
                {
                    "a": sheets[i].method,
                    "b": sheets[j].method,
                    "f": res.f,
                    "p": res.p,
                    "verdict": res.verdict,
                }
            )
    return {"methods": [s.method for s in sheets], "alpha": ALPHA, "pairs": pairs}


def average_feature_vector(X) -> np.ndarray:
    """Column-wise mean of a feature matrix (heatmap cell data)."""
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X)
    if values.size == 0:
        raise ValidationError("cannot average an empty feature matrix")
    return np.asarray(values, dtype=np.float64).mean(axis=0)


def heatmap_csv_name(extractor: str, train_corpus: str, eval_corpus: str) -> str:
    return f"heatmap_{extractor}_{train_corpus}_{eval_corpus}.csv"


def write_heatmap_csv(path, vector: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{v:.8g}" for v in np.asarray(vector).ravel()])


# ---------------------------------------------------------------------------
# Report rendering


def _fmt_mean(v: float) -> str:
    s = f"{v:.3f}"
    return s[1:] if s.startswith("0") else s


@dataclass
class Report:
    datasets: list[str]
    methods: list[str]
    csv_text: str
    table_text: str
    significance: dict


def render_report(cells: dict[tuple[str, str], ScoreSheet], datasets: list[str], methods: list[str]) -> Report:
    """Paper-style table: per-cell 3-decimal means with significance
    superscripts listing the 1-based indices of dominated methods; missing
    cells render as ``---``."""
    significance: dict[str, dict] = {}
    means: dict[tuple[str, str], float] = {}
    dominated: dict[tuple[str, str], list[int]] = {}

    for ds in datasets:
        row_sheets = [cells[(ds, m)] for m in methods if (ds, m) in cells]
        significance[ds] = significance_matrix(row_sheets)
        by_method = {s.method: s for s in row_sheets}
        for m in methods:
            if (ds, m) not in cells:
                continue
            means[(ds, m)] = cells[(ds, m)].mean()
        for pair in significance[ds]["pairs"]:
            res_sig = pair["verdict"] in (VERDICT_SIGNIFICANT, VERDICT_SIGNIFICANT_DEGENERATE)
            if not res_sig:
                continue
            ma, mb = pair["a"], pair["b"]
            winner, loser = (ma, mb) if by_method[ma].mean() > by_method[mb].mean() else (mb, ma)
            dominated.setdefault((ds, winner), []).append(methods.index(loser) + 1)

    csv_buf = io.StringIO()
    writer = csv.writer(csv_buf)
    writer.writerow(["dataset", "method", "mean", "significantly_better_than"])
    for ds in datasets:
        for m in methods:
            if (ds, m) in means:
                sup = " ".join(str(i) for i in sorted(dominated.get((ds, m), [])))
                writer.writerow([ds, m, f"{means[(ds, m)]:.3f}", sup])
            else:
                writer.writerow([ds, m, "---", ""])

    widths = [max(len("dataset"), *(len(d) for d in datasets))]
    widths += [max(8, len(m) + 2) for m in methods]
    lines = []
    header = "dataset".ljust(widths[0]) + "".join(m.rjust(w) for m, w in zip(methods, widths[1:]))
    lines.append(header)
    lines.append("-" * len(header))
    for ds in datasets:
        cells_fmt, sups_fmt = [], []
        for m, w in zip(methods, widths[1:]):
            if (ds, m) in means:
                cells_fmt.append(_fmt_mean(means[(ds, m)]).rjust(w))
                sup = ",".join(str(i) for i in sorted(dominated.get((ds, m), [])))
                sups_fmt.append((sup or "---").rjust(w))
            else:
                cells_fmt.append("---".rjust(w))
                sups_fmt.append("".rjust(w))
        lines.append(ds.ljust(widths[0]) + "".join(cells_fmt))
        lines.append("".ljust(widths[0]) + "".join(sups_fmt))
    lines.append("")
    lines.append(
        "metric: balanced accuracy (mean per-class recall; language-class strata on the mixed dataset)."
    )
    lines.append("superscripts: 1-based method indices the cell is significantly better than (alpha=0.05).")

    return Report(
        datasets=list(datasets),
        methods=list(methods),
        csv_text=csv_buf.getvalue(),
        table_text="\n".join(lines) + "\n",
        significance=significance,
    )


def save_report(report: Report, directory) -> dict:
    import os

    os.makedirs(directory, exist_ok=True)
    paths = {
        "csv": os.path.join(directory, "report.csv"),
        "table": os.path.join(directory, "report.txt"),
        "significance": os.path.join(directory, "significance.json"),
    }
    for path, payload in (
        (paths["csv"], report.csv_text),
        (paths["table"], report.table_text),
    ):
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    tmp = f"{paths['significance']}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(report.significance, fh, sort_keys=True, indent=1)
    os.replace(tmp, paths["significance"])
    return paths
