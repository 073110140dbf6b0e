"""Two-hidden-layer perceptron trained with Adam and early stopping.

Forward pass: standardize -> relu(W1) -> relu(W2) -> softmax. Training
minimizes mean cross-entropy with Adam on shuffled mini-batches, holds out
a stratified validation split, stops when validation loss stalls, and
restores the best-epoch weights. Everything is deterministic given the
seed.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError, ValidationError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MODEL_MAGIC = b"MLP1"


@dataclass
class MlpConfig:
    hidden: tuple[int, ...] = (500, 500)
    lr: float = 1e-3
    max_epochs: int = 200
    batch_size: int = 32
    val_fraction: float = 0.1
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.val_fraction < 1.0):
            raise ValidationError("val_fraction must be in (0, 1)")
        if min(self.lr, self.max_epochs, self.batch_size, self.patience) <= 0 or not self.hidden:
            raise ValidationError("MLP configuration values must be positive")

    def as_dict(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "lr": self.lr,
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "val_fraction": self.val_fraction,
            "patience": self.patience,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpConfig":
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    classes: np.ndarray
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    config: MlpConfig
    history: dict = field(default_factory=dict)  # per-epoch train/val loss
    best_epoch: int = 0

    @property
    def n_features(self) -> int:
        return int(self.weights[0].shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.weights[-1].shape[1])


def _forward(weights, biases, X):
    """Hidden activations and logits; returns (activations, logits)."""
    acts = [X]
    a = X
    for W, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ W + b, 0.0)
        acts.append(a)
    logits = a @ weights[-1] + biases[-1]
    return acts, logits


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_gradients(weights, biases, X, y_idx):
    """Mean cross-entropy and its gradients for one batch.

    `y_idx` holds class indices into the output layer. Returns
    (loss, grad_weights, grad_biases).
    """
    n = X.shape[0]
    acts, logits = _forward(weights, biases, X)
    log_p = _log_softmax(logits)
    loss = -float(log_p[np.arange(n), y_idx].mean())

    delta = np.exp(log_p)
    delta[np.arange(n), y_idx] -= 1.0
    delta /= n

    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (acts[layer] > 0.0)
    return loss, grad_w, grad_b


def _mean_loss(weights, biases, X, y_idx):
    _, logits = _forward(weights, biases, X)
    log_p = _log_softmax(logits)
    return -float(log_p[np.arange(X.shape[0]), y_idx].mean())


def _stratified_split(y_idx, val_fraction, rng):
    """Per-class holdout of roughly `val_fraction`, at least 1, at most n_c - 1."""
    train_idx, val_idx = [], []
    for c in np.unique(y_idx):
        members = np.flatnonzero(y_idx == c)
        members = members[rng.permutation(members.size)]
        n_val = int(round(val_fraction * members.size))
        n_val = min(max(n_val, 1), members.size - 1)
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    return np.sort(np.array(train_idx)), np.sort(np.array(val_idx))


def train(X, y, cfg: MlpConfig) -> MlpModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError("X must be 2-D with one label per row")
    if not np.isfinite(X).all():
        raise ValidationError("training matrix contains non-finite values")
    classes = np.unique(y)
    if classes.size < 2:
        raise TrainingError("need at least 2 classes to train")
    class_to_idx = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([class_to_idx[v] for v in y], dtype=np.int64)

    feat_mean = X.mean(axis=0)
    var = X.var(axis=0)
    feat_scale = np.sqrt(np.where(var > 0.0, var, 1.0))
    Xs = (X - feat_mean) / feat_scale

    rng = np.random.default_rng(cfg.seed)
    train_rows, val_rows = _stratified_split(y_idx, cfg.val_fraction, rng)
    X_train, y_train = Xs[train_rows], y_idx[train_rows]
    X_val, y_val = Xs[val_rows], y_idx[val_rows]

    sizes = [X.shape[1], *cfg.hidden, classes.size]
    weights = [
        rng.normal(0.0, np.sqrt(2.0 / sizes[i]), size=(sizes[i], sizes[i + 1]))
        for i in range(len(sizes) - 1)
    ]
    biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]

    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0

    best_val = np.inf
    best_epoch = 0
    best_state = None
    since_best = 0
    train_losses, val_losses = [], []

    n_train = X_train.shape[0]
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, cfg.batch_size):
            rows = perm[start : start + cfg.batch_size]
            loss, grad_w, grad_b = loss_and_gradients(weights, biases, X_train[rows], y_train[rows])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            epoch_loss += loss * rows.size
            step += 1
            corr1 = 1.0 - ADAM_BETA1**step
            corr2 = 1.0 - ADAM_BETA2**step
            for i in range(len(weights)):
                m_w[i] = ADAM_BETA1 * m_w[i] + (1 - ADAM_BETA1) * grad_w[i]
                v_w[i] = ADAM_BETA2 * v_w[i] + (1 - ADAM_BETA2) * grad_w[i] ** 2
                weights[i] -= cfg.lr * (m_w[i] / corr1) / (np.sqrt(v_w[i] / corr2) + ADAM_EPS)
                m_b[i] = ADAM_BETA1 * m_b[i] + (1 - ADAM_BETA1) * grad_b[i]
                v_b[i] = ADAM_BETA2 * v_b[i] + (1 - ADAM_BETA2) * grad_b[i] ** 2
                biases[i] -= cfg.lr * (m_b[i] / corr1) / (np.sqrt(v_b[i] / corr2) + ADAM_EPS)
        train_losses.append(epoch_loss / n_train)
        val_loss = _mean_loss(weights, biases, X_val, y_val)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = ([w.copy() for w in weights], [b.copy() for b in biases])
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    weights, biases = best_state
    return MlpModel(
        weights=weights,
        biases=biases,
        classes=classes,
        feat_mean=feat_mean,
        feat_scale=feat_scale,
        config=cfg,
        history={"train_loss": train_losses, "val_loss": val_losses},
        best_epoch=best_epoch,
    )


def predict_support(model: MlpModel, X) -> np.ndarray:
    """Softmax class probabilities, one row per input row."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValidationError(
            f"input width {X.shape[1] if X.ndim == 2 else '?'} does not match "
            f"model width {model.n_features}"
        )
    Xs = (X - model.feat_mean) / model.feat_scale
    _, logits = _forward(model.weights, model.biases, Xs)
    return np.exp(_log_softmax(logits))


def predict_class(model: MlpModel, X) -> np.ndarray:
    support = predict_support(model, X)
    return model.classes[np.argmax(support, axis=1)]


def save_model(model: MlpModel, path) -> None:
    """JSON header (shapes, config, standardization stats) + f32 parameter blob."""
    header = {
        "layer_sizes": [model.weights[0].shape[0]] + [w.shape[1] for w in model.weights],
        "classes": model.classes.tolist(),
        "config": model.config.as_dict(),
        "feat_mean": model.feat_mean.tolist(),
        "feat_scale": model.feat_scale.tolist(),
        "history": model.history,
        "best_epoch": model.best_epoch,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()
        for pair in zip(model.weights, model.biases)
        for arr in pair
    )
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<4sI", MODEL_MAGIC, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)
    os.replace(tmp, path)


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sI"))
        magic, header_len = struct.unpack("<4sI", head)
        if magic != MODEL_MAGIC:
            raise ValidationError(f"{path}: not an MLP model file")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        blob = fh.read()
    sizes = header["layer_sizes"]
    weights, biases = [], []
    offset = 0
    for i in range(len(sizes) - 1):
        n_w = sizes[i] * sizes[i + 1]
        weights.append(
            np.frombuffer(blob, dtype="<f4", count=n_w, offset=offset)
            .reshape(sizes[i], sizes[i + 1])
            .astype(np.float64)
        )
        offset += 4 * n_w
        biases.append(
            np.frombuffer(blob, dtype="<f4", count=sizes[i + 1], offset=offset).astype(np.float64)
        )
        offset += 4 * sizes[i + 1]
    return MlpModel(
        weights=weights,
        biases=biases,
        classes=np.array(header["classes"], dtype=np.int64),
        feat_mean=np.array(header["feat_mean"]),
        feat_scale=np.array(header["feat_scale"]),
        config=MlpConfig.from_dict(header["config"]),
        history=header["history"],
        best_epoch=int(header["best_epoch"]),
    )
