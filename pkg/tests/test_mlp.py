import numpy as np
import pytest

from polynews import mlp
from polynews.errors import TrainingError, ValidationError


def finite_difference_gradients(weights, biases, X, y, h=1e-5):
    """Central-difference oracle over every parameter (loss evaluations only)."""
    grad_w = [np.zeros_like(w) for w in weights]
    grad_b = [np.zeros_like(b) for b in biases]

    def loss_at():
        loss, _, _ = mlp.loss_and_gradients(weights, biases, X, y)
        return loss

    for layer, w in enumerate(weights):
        it = np.nditer(w, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = w[idx]
            w[idx] = orig + h
            lp = loss_at()
            w[idx] = orig - h
            lm = loss_at()
            w[idx] = orig
            grad_w[layer][idx] = (lp - lm) / (2 * h)
            it.iternext()
    for layer, b in enumerate(biases):
        for idx in range(b.size):
            orig = b[idx]
            b[idx] = orig + h
            lp = loss_at()
            b[idx] = orig - h
            lm = loss_at()
            b[idx] = orig
            grad_b[layer][idx] = (lp - lm) / (2 * h)
    return grad_w, grad_b


def random_network(rng, n_in=None, n_out=None):
    n_in = n_in or int(rng.integers(3, 7))
    n_h1 = int(rng.integers(4, 8))
    n_h2 = int(rng.integers(3, 6))
    n_out = n_out or int(rng.integers(2, 4))
    sizes = [n_in, n_h1, n_h2, n_out]
    weights = [rng.normal(0, 0.8, size=(sizes[i], sizes[i + 1])) for i in range(3)]
    biases = [rng.normal(0, 0.3, size=sizes[i + 1]) for i in range(3)]
    return weights, biases, n_in, n_out


def max_relative_error(analytic, numeric):
    errs = []
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        errs.append((np.abs(a - n) / denom).max())
    return max(errs)


class TestGradients:
    def test_analytic_matches_finite_differences_20_networks(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(20):
            weights, biases, n_in, n_out = random_network(rng)
            X = rng.normal(size=(5, n_in))
            y = rng.integers(0, n_out, 5)
            _, gw, gb = mlp.loss_and_gradients(weights, biases, X, y)
            fw, fb = finite_difference_gradients(weights, biases, X, y)
            worst = max(worst, max_relative_error(gw, fw), max_relative_error(gb, fb))
        assert worst < 1e-4


class TestTraining:
    def _separable(self, n=20, seed=0):
        rng = np.random.default_rng(seed)
        half = n // 2
        X = np.vstack(
            [rng.normal(loc=-2.0, scale=0.3, size=(half, 4)), rng.normal(loc=2.0, scale=0.3, size=(half, 4))]
        )
        y = np.array([0] * half + [1] * half)
        return X, y

    def test_overfits_separable_toy_set(self):
        X, y = self._separable()
        cfg = mlp.MlpConfig(hidden=(16, 16), max_epochs=200, batch_size=4, seed=1)
        model = mlp.train(X, y, cfg)
        assert np.array_equal(mlp.predict_class(model, X), y)

    def test_deterministic_given_seed(self):
        X, y = self._separable(seed=3)
        cfg = mlp.MlpConfig(hidden=(8,), max_epochs=30, batch_size=4, seed=5)
        a = mlp.train(X, y, cfg)
        b = mlp.train(X, y, cfg)
        assert a.best_epoch == b.best_epoch
        assert a.history == b.history
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_best_val_loss_not_worse_than_first_epoch(self):
        X, y = self._separable(n=40, seed=4)
        cfg = mlp.MlpConfig(hidden=(8,), max_epochs=50, batch_size=8, seed=2)
        model = mlp.train(X, y, cfg)
        val = model.history["val_loss"]
        assert min(val) <= val[0]
        assert model.best_epoch == int(np.argmin(val)) + 1

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 3))
        with pytest.raises(TrainingError):
            mlp.train(X, np.zeros(10, dtype=int), mlp.MlpConfig(hidden=(4,), seed=0))

    def test_non_finite_input_rejected(self):
        X = np.full((10, 3), np.nan)
        y = np.array([0, 1] * 5)
        with pytest.raises(ValidationError):
            mlp.train(X, y, mlp.MlpConfig(hidden=(4,), seed=0))


class TestPrediction:
    def _model(self, n_in=3, hidden=(4,), n_out=2, zero=False, seed=0):
        rng = np.random.default_rng(seed)
        sizes = [n_in, *hidden, n_out]
        make = (lambda *s: np.zeros(s)) if zero else (lambda *s: rng.normal(size=s))
        return mlp.MlpModel(
            weights=[make(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)],
            biases=[np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)],
            classes=np.arange(n_out),
            feat_mean=np.zeros(n_in),
            feat_scale=np.ones(n_in),
            config=mlp.MlpConfig(hidden=hidden, seed=seed),
        )

    def test_supports_sum_to_one(self):
        model = self._model(seed=1)
        X = np.random.default_rng(2).normal(size=(50, 3))
        support = mlp.predict_support(model, X)
        assert np.all(support >= 0)
        np.testing.assert_allclose(support.sum(axis=1), 1.0, atol=1e-6)

    def test_zero_network_uniform_support(self):
        model = self._model(zero=True)
        support = mlp.predict_support(model, np.ones((4, 3)))
        np.testing.assert_allclose(support, 0.5, atol=1e-12)

    def test_width_mismatch_rejected(self):
        model = self._model()
        with pytest.raises(ValidationError, match="width"):
            mlp.predict_support(model, np.ones((2, 7)))


class TestSerialization:
    def test_round_trip_predictions(self, tmp_path):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(30, 5))
        y = (X[:, 0] > 0).astype(int)
        model = mlp.train(X, y, mlp.MlpConfig(hidden=(8,), max_epochs=20, batch_size=8, seed=7))
        path = tmp_path / "model.mlp"
        mlp.save_model(model, path)
        loaded = mlp.load_model(path)
        # parameters pass through f32 on disk; predictions agree to f32 noise
        np.testing.assert_allclose(
            mlp.predict_support(loaded, X), mlp.predict_support(model, X), atol=1e-5
        )
        assert loaded.best_epoch == model.best_epoch
        assert loaded.config == model.config
