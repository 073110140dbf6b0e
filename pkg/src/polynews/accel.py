"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

The per-document variational E step of the topic model dominates runtime
and exists in two interchangeable implementations:

* ``lda_estep_numba`` -- nopython-compiled loops (~10x faster, used by
  default when numba imports successfully),
* ``lda_estep_numpy`` -- vectorized numpy, always available.

Set ``POLYNEWS_NO_NUMBA=1`` to force the numpy path; the dispatcher picks
once at import time. Both paths implement the same arithmetic and agree
to floating-point accumulation order.

The binned mutual-information scan also has both variants, but there the
numpy path wins (sorting dominates and numpy's sort is already native),
so :func:`binned_mutual_information` always uses it; the numba variant
stays available for the benchmark that documents the comparison
(benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import math
import os

import numpy as np

NUMBA_DISABLED = os.environ.get("POLYNEWS_NO_NUMBA", "0").lower() in ("1", "true", "yes")

HAVE_NUMBA = False
if not NUMBA_DISABLED:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        pass

if not HAVE_NUMBA:

    def njit(*args, **kwargs):  # noqa: D103 - decorator stand-in
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# digamma
#
# Both kernel paths need the digamma function; scipy.special.psi is not
# callable from nopython code, so one shared algorithm is implemented twice
# (scalar for numba, vectorized for numpy). Recurrence shift to x >= 6, then
# the asymptotic series in 1/x^2.


def _digamma_scalar(x: float) -> float:
    r = 0.0
    while x < 6.0:
        r -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    s = math.log(x) - 0.5 * inv
    s -= inv2 * (
        1.0 / 12.0
        - inv2
        * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0)))
    )
    return r + s


def digamma(x):
    """Vectorized digamma, same series as the scalar kernel version."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    xx = np.atleast_1d(x).copy()
    r = np.zeros_like(xx)
    while True:
        mask = xx < 6.0
        if not mask.any():
            break
        r[mask] -= 1.0 / xx[mask]
        xx[mask] += 1.0
    inv = 1.0 / xx
    inv2 = inv * inv
    s = np.log(xx) - 0.5 * inv
    s -= inv2 * (
        1.0 / 12.0
        - inv2
        * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0)))
    )
    out = r + s
    return float(out[0]) if scalar else out


_digamma_nb = njit(cache=False)(_digamma_scalar) if HAVE_NUMBA else _digamma_scalar


# ---------------------------------------------------------------------------
# LDA variational E step
#
# Documents arrive in CSR-like form: token ids and counts flattened, with
# offsets delimiting each document. The kernel iterates the fixed point
#     gamma_dk = alpha + expElogtheta_dk * sum_w beta_kw * c_w / phinorm_w
# until the mean absolute change in gamma drops below `tol` or `max_iters`
# is hit, and accumulates the sufficient statistics
#     sstats_kw += expElogtheta_dk * c_w / phinorm_w
# (the caller multiplies sstats by expElogbeta afterwards).


def lda_estep_numpy(ids, cts, offsets, exp_elog_beta, alpha, gamma_init, max_iters, tol):
    n_docs = offsets.shape[0] - 1
    gamma = gamma_init.copy()
    sstats = np.zeros_like(exp_elog_beta)
    for d in range(n_docs):
        lo, hi = offsets[d], offsets[d + 1]
        w = ids[lo:hi]
        c = cts[lo:hi]
        gd = gamma[d].copy()
        elog = digamma(gd) - digamma(gd.sum())
        expelog = np.exp(elog)
        beta_d = exp_elog_beta[:, w]
        phinorm = expelog @ beta_d + 1e-100
        for _ in range(max_iters):
            last = gd
            gd = alpha + expelog * (beta_d @ (c / phinorm))
            elog = digamma(gd) - digamma(gd.sum())
            expelog = np.exp(elog)
            phinorm = expelog @ beta_d + 1e-100
            if np.mean(np.abs(gd - last)) < tol:
                break
        gamma[d] = gd
        sstats[:, w] += np.outer(expelog, c / phinorm)
    return gamma, sstats


def _lda_estep_loops(ids, cts, offsets, exp_elog_beta, alpha, gamma_init, max_iters, tol):
    n_docs = offsets.shape[0] - 1
    n_topics = exp_elog_beta.shape[0]
    gamma = gamma_init.copy()
    sstats = np.zeros_like(exp_elog_beta)
    expelog = np.empty(n_topics)
    for d in range(n_docs):
        lo = offsets[d]
        hi = offsets[d + 1]
        n_w = hi - lo
        gd = gamma[d].copy()
        gsum = 0.0
        for k in range(n_topics):
            gsum += gd[k]
        psi_sum = _digamma_nb(gsum)
        for k in range(n_topics):
            expelog[k] = math.exp(_digamma_nb(gd[k]) - psi_sum)
        phinorm = np.empty(n_w)
        for i in range(n_w):
            acc = 0.0
            for k in range(n_topics):
                acc += expelog[k] * exp_elog_beta[k, ids[lo + i]]
            phinorm[i] = acc + 1e-100
        for _ in range(max_iters):
            change = 0.0
            gsum = 0.0
            for k in range(n_topics):
                acc = 0.0
                for i in range(n_w):
                    acc += exp_elog_beta[k, ids[lo + i]] * cts[lo + i] / phinorm[i]
                gnew = alpha + expelog[k] * acc
                change += abs(gnew - gd[k])
                gd[k] = gnew
                gsum += gnew
            psi_sum = _digamma_nb(gsum)
            for k in range(n_topics):
                expelog[k] = math.exp(_digamma_nb(gd[k]) - psi_sum)
            for i in range(n_w):
                acc = 0.0
                for k in range(n_topics):
                    acc += expelog[k] * exp_elog_beta[k, ids[lo + i]]
                phinorm[i] = acc + 1e-100
            if change / n_topics < tol:
                break
        for k in range(n_topics):
            gamma[d, k] = gd[k]
        for i in range(n_w):
            ratio = cts[lo + i] / phinorm[i]
            for k in range(n_topics):
                sstats[k, ids[lo + i]] += expelog[k] * ratio
    return gamma, sstats


lda_estep_numba = njit(cache=False)(_lda_estep_loops) if HAVE_NUMBA else None


def lda_estep(ids, cts, offsets, exp_elog_beta, alpha, gamma_init, max_iters, tol):
    """Dispatch the E step to the active kernel path."""
    if lda_estep_numba is not None:
        return lda_estep_numba(ids, cts, offsets, exp_elog_beta, alpha, gamma_init, max_iters, tol)
    return lda_estep_numpy(ids, cts, offsets, exp_elog_beta, alpha, gamma_init, max_iters, tol)


# ---------------------------------------------------------------------------
# Binned mutual information
#
# Each column is discretized into `n_bins` equal-frequency bins (inner edges
# at the k/n_bins quantiles, linear interpolation) and the discrete mutual
# information with the integer labels is computed in nats.


def _quantile_sorted(sorted_col, q):
    # numpy's default "linear" interpolation, on an already sorted array
    pos = q * (sorted_col.shape[0] - 1)
    lo = int(pos)
    frac = pos - lo
    if lo + 1 >= sorted_col.shape[0]:
        return sorted_col[lo]
    return sorted_col[lo] + (sorted_col[lo + 1] - sorted_col[lo]) * frac


def binned_mi_numpy(X, y, n_bins=20):
    n, m = X.shape
    n_classes = int(y.max()) + 1
    class_counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    scores = np.empty(m)
    for j in range(m):
        col = X[:, j]
        sorted_col = np.sort(col)
        edges = np.empty(n_bins - 1)
        for k in range(1, n_bins):
            edges[k - 1] = _quantile_sorted(sorted_col, k / n_bins)
        bins = np.searchsorted(edges, col, side="right")
        joint = np.bincount(bins * n_classes + y, minlength=n_bins * n_classes).astype(np.float64)
        joint = joint.reshape(n_bins, n_classes)
        bin_counts = joint.sum(axis=1)
        mi = 0.0
        for b in range(n_bins):
            if bin_counts[b] == 0.0:
                continue
            for c in range(n_classes):
                nxy = joint[b, c]
                if nxy > 0.0:
                    mi += (nxy / n) * math.log(nxy * n / (bin_counts[b] * class_counts[c]))
        scores[j] = mi
    return scores


def _binned_mi_loops(X, y, n_bins):
    n, m = X.shape
    n_classes = int(y.max()) + 1
    class_counts = np.zeros(n_classes)
    for i in range(n):
        class_counts[y[i]] += 1.0
    scores = np.empty(m)
    edges = np.empty(n_bins - 1)
    joint = np.empty((n_bins, n_classes))
    for j in range(m):
        col = X[:, j].copy()
        sorted_col = np.sort(col)
        for k in range(1, n_bins):
            pos = (k / n_bins) * (n - 1)
            lo = int(pos)
            frac = pos - lo
            if lo + 1 >= n:
                edges[k - 1] = sorted_col[lo]
            else:
                edges[k - 1] = sorted_col[lo] + (sorted_col[lo + 1] - sorted_col[lo]) * frac
        for b in range(n_bins):
            for c in range(n_classes):
                joint[b, c] = 0.0
        for i in range(n):
            b = np.searchsorted(edges, col[i], side="right")
            joint[b, y[i]] += 1.0
        mi = 0.0
        for b in range(n_bins):
            bin_count = 0.0
            for c in range(n_classes):
                bin_count += joint[b, c]
            if bin_count == 0.0:
                continue
            for c in range(n_classes):
                nxy = joint[b, c]
                if nxy > 0.0:
                    mi += (nxy / n) * math.log(nxy * n / (bin_count * class_counts[c]))
        scores[j] = mi
    return scores


binned_mi_numba = njit(cache=False)(_binned_mi_loops) if HAVE_NUMBA else None


def binned_mutual_information(X, y, n_bins=20):
    """Per-column MI with the labels, in nats.

    Always the numpy implementation: benchmarking shows it beats the
    compiled loops here (the per-column sort dominates either way).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    return binned_mi_numpy(X, y, n_bins)


def active_path() -> str:
    """Which kernel path the dispatchers use: 'numba' or 'numpy'."""
    return "numba" if HAVE_NUMBA else "numpy"
