import numpy as np
import pytest
from scipy.special import psi

from polynews import accel


class TestDigamma:
    def test_matches_scipy(self):
        x = np.concatenate([np.linspace(0.005, 2, 400), np.linspace(2, 80, 400)])
        np.testing.assert_allclose(accel.digamma(x), psi(x), atol=1e-10)

    def test_scalar_and_vector_agree(self):
        for v in (0.01, 0.5, 1.0, 5.9, 6.0, 42.0):
            assert accel._digamma_scalar(v) == pytest.approx(accel.digamma(v), abs=1e-15)


def _random_batch(rng, n_docs=15, n_topics=8, vocab=50):
    lam = rng.gamma(100.0, 0.01, (n_topics, vocab))
    eeb = np.exp(accel.digamma(lam) - accel.digamma(lam.sum(axis=1))[:, None])
    ids, cts, offsets = [], [], [0]
    for _ in range(n_docs):
        n_w = int(rng.integers(0, 12))  # includes empty documents
        words = rng.choice(vocab, size=n_w, replace=False)
        ids.extend(sorted(words))
        cts.extend(rng.integers(1, 6, size=n_w).astype(float))
        offsets.append(len(ids))
    return (
        np.array(ids, dtype=np.int64),
        np.array(cts, dtype=np.float64),
        np.array(offsets, dtype=np.int64),
        eeb,
        rng.gamma(100.0, 0.01, (n_docs, n_topics)),
    )


@pytest.mark.skipif(not accel.HAVE_NUMBA, reason="numba path not active")
class TestKernelParity:
    def test_lda_estep_paths_agree(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            ids, cts, offsets, eeb, ginit = _random_batch(rng)
            g_np, s_np = accel.lda_estep_numpy(ids, cts, offsets, eeb, 0.1, ginit, 80, 1e-3)
            g_nb, s_nb = accel.lda_estep_numba(ids, cts, offsets, eeb, 0.1, ginit, 80, 1e-3)
            np.testing.assert_allclose(g_nb, g_np, rtol=1e-8, atol=1e-10)
            np.testing.assert_allclose(s_nb, s_np, rtol=1e-8, atol=1e-10)

    def test_mi_paths_agree(self):
        rng = np.random.default_rng(1)
        X = np.ascontiguousarray(rng.normal(size=(500, 12)))
        X[:, 3] = rng.integers(0, 3, 500)  # heavy ties
        y = rng.integers(0, 2, 500).astype(np.int64)
        np.testing.assert_allclose(
            accel.binned_mi_numba(X, y, 20), accel.binned_mi_numpy(X, y, 20), atol=1e-12
        )


class TestEstepBehavior:
    def test_empty_document_converges_to_prior(self):
        rng = np.random.default_rng(2)
        _, _, _, eeb, _ = _random_batch(rng, n_docs=1)
        ids = np.array([], dtype=np.int64)
        cts = np.array([], dtype=np.float64)
        offsets = np.array([0, 0], dtype=np.int64)
        ginit = rng.gamma(100.0, 0.01, (1, eeb.shape[0]))
        gamma, sstats = accel.lda_estep(ids, cts, offsets, eeb, 0.25, ginit, 50, 1e-3)
        np.testing.assert_allclose(gamma[0], 0.25, atol=1e-12)
        assert np.all(sstats == 0.0)

    def test_gamma_positive(self):
        rng = np.random.default_rng(3)
        ids, cts, offsets, eeb, ginit = _random_batch(rng)
        gamma, _ = accel.lda_estep(ids, cts, offsets, eeb, 0.1, ginit, 80, 1e-3)
        assert np.all(gamma > 0)
