#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--docs 2000] [--topics 100]
                                       [--vocab 2000] [--repeats 3]

The same inputs are fed to both implementations; results are checked to
agree before timings are reported. Running with POLYNEWS_NO_NUMBA=1 leaves
only the numpy column (the dispatcher then always picks numpy).
"""

import argparse
import time

import numpy as np

from polynews import accel


def make_lda_batch(rng, n_docs, n_topics, vocab, avg_len=60):
    lam = rng.gamma(100.0, 0.01, (n_topics, vocab))
    eeb = np.exp(accel.digamma(lam) - accel.digamma(lam.sum(axis=1))[:, None])
    ids, cts, offsets = [], [], [0]
    for _ in range(n_docs):
        n_w = max(1, int(rng.poisson(avg_len) * 0.4))
        n_w = min(n_w, vocab)
        words = rng.choice(vocab, size=n_w, replace=False)
        ids.extend(sorted(words))
        cts.extend(rng.integers(1, 5, size=n_w).astype(float))
        offsets.append(len(ids))
    return (
        np.array(ids, dtype=np.int64),
        np.array(cts, dtype=np.float64),
        np.array(offsets, dtype=np.int64),
        eeb,
        rng.gamma(100.0, 0.01, (n_docs, n_topics)),
    )


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--docs", type=int, default=2000)
    parser.add_argument("--topics", type=int, default=100)
    parser.add_argument("--vocab", type=int, default=2000)
    parser.add_argument("--rows", type=int, default=20000, help="MI benchmark rows")
    parser.add_argument("--cols", type=int, default=200, help="MI benchmark columns")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"active dispatch path: {accel.active_path()}")
    print()

    rows = []

    ids, cts, offsets, eeb, ginit = make_lda_batch(rng, args.docs, args.topics, args.vocab)
    label = f"lda_estep  ({args.docs} docs, {args.topics} topics, vocab {args.vocab})"
    t_np, (g_np, s_np) = timeit(
        lambda: accel.lda_estep_numpy(ids, cts, offsets, eeb, 0.01, ginit, 400, 1e-3), args.repeats
    )
    if accel.HAVE_NUMBA:
        accel.lda_estep_numba(ids[:10], cts[:10], offsets[:3], eeb, 0.01, ginit[:2], 5, 1e-3)  # compile
        t_nb, (g_nb, s_nb) = timeit(
            lambda: accel.lda_estep_numba(ids, cts, offsets, eeb, 0.01, ginit, 400, 1e-3), args.repeats
        )
        assert np.allclose(g_nb, g_np, rtol=1e-8, atol=1e-10)
        rows.append((label, t_np, t_nb))
    else:
        rows.append((label, t_np, None))

    X = np.ascontiguousarray(rng.normal(size=(args.rows, args.cols)))
    y = rng.integers(0, 2, args.rows).astype(np.int64)
    label = f"binned_mi  ({args.rows} rows, {args.cols} cols, 20 bins)"
    t_np, mi_np = timeit(lambda: accel.binned_mi_numpy(X, y, 20), args.repeats)
    if accel.HAVE_NUMBA:
        accel.binned_mi_numba(X[:50, :2], y[:50], 20)  # compile
        t_nb, mi_nb = timeit(lambda: accel.binned_mi_numba(X, y, 20), args.repeats)
        assert np.allclose(mi_nb, mi_np, atol=1e-12)
        rows.append((label, t_np, t_nb))
    else:
        rows.append((label, t_np, None))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for label, t_np, t_nb in rows:
        if t_nb is None:
            print(f"{label.ljust(width)}  {t_np:>9.3f}s  {'-':>10}  {'-':>8}")
        else:
            print(f"{label.ljust(width)}  {t_np:>9.3f}s  {t_nb:>9.3f}s  {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
