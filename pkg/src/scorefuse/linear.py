"""Desk-scale trainable classifier: multinomial logistic regression via SGD.

One weak, fast, fully deterministic learner backs everything that needs a
trainable model — base classifiers, bagging/boosting members, the stacking
meta-learner. Determinism contract: zero weight initialization (the problem
is convex), a seeded Fisher-Yates shuffle per epoch, sequential batch
updates, and sequential gradient reduction, so identical runs produce
bitwise-identical models.

Sample weights enter the loss as per-sample multipliers normalized to mean
one, keeping the learning-rate scale independent of any reweighting round.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AllZeroWeightsError,
    DimensionMismatchError,
    EmptyDatasetError,
    FormatError,
    IoError,
    NonFiniteLossError,
    ValidationError,
)
from .images import RasterImage, resize_square
from .io import atomic_write
from .types import LabelSpace, ProbVector, ScoreRow, ScoreTable


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 32
    l2: float = 0.0
    seed: int = 42

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.l2 < 0:
            raise ValidationError(f"l2 must be nonnegative, got {self.l2}")


@dataclass(frozen=True, eq=False)
class LinearModel:
    """K x d weight matrix plus K biases over a fixed label space."""

    weights: np.ndarray
    bias: np.ndarray
    label_space: LabelSpace

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        k = len(self.label_space)
        if w.ndim != 2 or w.shape[0] != k:
            raise DimensionMismatchError(
                f"weights shape {w.shape} does not match {k} classes"
            )
        if b.shape != (k,):
            raise DimensionMismatchError(f"bias shape {b.shape} does not match {k} classes")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValidationError("model parameters must be finite")
        w = w.copy()
        b = b.copy()
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]


def extract_features(img: RasterImage, side: int) -> np.ndarray:
    """Stretch-resize to side x side and flatten row-major (d = side**2)."""
    return resize_square(img, side, mode="stretch").pixels.reshape(-1)


def softmax(logits: Sequence[float]) -> ProbVector:
    """Exponential normalization with max subtraction for overflow safety."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValidationError("logits must be finite")
    return ProbVector(tuple(float(p) for p in _softmax_rows(z[None, :])[0]))


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _as_label_indices(labels: Sequence[str], label_space: LabelSpace) -> np.ndarray:
    return np.asarray([label_space.index(lab) for lab in labels], dtype=np.int64)


def _normalized_sample_weights(sample_weights, n: int) -> np.ndarray:
    if sample_weights is None:
        return np.ones(n)
    w = np.asarray(sample_weights, dtype=np.float64)
    if w.shape != (n,):
        raise DimensionMismatchError(f"sample_weights shape {w.shape}, expected ({n},)")
    if np.any(w < 0):
        raise ValidationError("sample weights must be nonnegative")
    total = w.sum()
    if total == 0:
        raise AllZeroWeightsError("sample weights must not all be zero")
    return w / (total / n)  # mean 1


def _batch_terms(
    weights: np.ndarray,
    bias: np.ndarray,
    X: np.ndarray,
    y_idx: np.ndarray,
    w_mult: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and exact gradient for one batch, given mean-1 weight multipliers."""
    n = X.shape[0]
    log_p = _log_softmax_rows(X @ weights.T + bias)
    ce = -log_p[np.arange(n), y_idx]
    loss = float((w_mult * ce).mean() + 0.5 * l2 * float((weights**2).sum()))
    delta = np.exp(log_p)
    delta[np.arange(n), y_idx] -= 1.0
    delta *= (w_mult / n)[:, None]
    grad_w = delta.T @ X + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def loss_and_grad(
    model: LinearModel,
    features: np.ndarray,
    labels: Sequence[str],
    l2: float = 0.0,
    sample_weights: Sequence[float] | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean weighted cross-entropy plus (l2/2)*||W||^2, with its exact gradient.

    Returns (loss, d_loss/d_weights, d_loss/d_bias). The bias is not
    regularized. Cross-entropy is computed through log-softmax, so the loss
    stays finite for any finite logits.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError(f"features must be 2-D, got shape {X.shape}")
    n = X.shape[0]
    if n == 0:
        raise EmptyDatasetError("batch must contain at least one sample")
    if X.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"{X.shape[1]} features vs model dimension {model.n_features}"
        )
    if len(labels) != n:
        raise DimensionMismatchError(f"{len(labels)} labels for {n} samples")
    y = _as_label_indices(labels, model.label_space)
    w = _normalized_sample_weights(sample_weights, n)
    return _batch_terms(model.weights, model.bias, X, y, w, l2)


def train(
    features: np.ndarray,
    labels: Sequence[str],
    label_space: LabelSpace,
    config: TrainConfig,
    sample_weights: Sequence[float] | None = None,
) -> LinearModel:
    """Fit by mini-batch SGD; deterministic for a given config seed.

    Sample weights, when given, are normalized to mean 1 over the whole
    dataset once, not per batch, so a boosting round's emphasis carries
    through every minibatch.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError(f"need a non-empty 2-D feature matrix, got shape {X.shape}")
    n, d = X.shape
    if len(labels) != n:
        raise DimensionMismatchError(f"{len(labels)} labels for {n} samples")
    y_idx = _as_label_indices(labels, label_space)
    w_full = _normalized_sample_weights(sample_weights, n)

    k = len(label_space)
    weights = np.zeros((k, d))
    bias = np.zeros(k)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grad_w, grad_b = _batch_terms(
                weights, bias, X[batch], y_idx[batch], w_full[batch], config.l2
            )
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"training loss became {loss}")
            weights = weights - config.learning_rate * grad_w
            bias = bias - config.learning_rate * grad_b
    return LinearModel(weights, bias, label_space)


def predict_logits(model: LinearModel, features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"{X.shape[1]} features vs model dimension {model.n_features}"
        )
    logits = X @ model.weights.T + model.bias
    return logits[0] if single else logits


def predict_proba(model: LinearModel, features: np.ndarray) -> ProbVector:
    """softmax(W x + b) for a single feature vector."""
    return softmax(predict_logits(model, features))


def predict_matrix(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """Probability matrix (n, K) for a feature matrix (n, d)."""
    return _softmax_rows(predict_logits(model, np.atleast_2d(features)))


def score_table(
    model: LinearModel,
    model_id: str,
    sample_ids: Sequence[str],
    features: np.ndarray,
    labels: Sequence[str | None] | None = None,
) -> ScoreTable:
    """Package a model's predictions over a feature matrix as a ScoreTable."""
    probs = predict_matrix(model, features)
    if len(sample_ids) != probs.shape[0]:
        raise DimensionMismatchError(f"{len(sample_ids)} ids for {probs.shape[0]} samples")
    rows = tuple(
        ScoreRow(
            sample_ids[i],
            ProbVector(tuple(float(p) for p in probs[i])),
            labels[i] if labels is not None else None,
        )
        for i in range(len(sample_ids))
    )
    return ScoreTable(model.label_space, model_id, rows)


# -- persistence ---------------------------------------------------------------

MODEL_KIND = "linear_model"


def model_to_dict(model: LinearModel, config: TrainConfig | None = None) -> dict:
    return {
        "kind": MODEL_KIND,
        "label_space": list(model.label_space.classes),
        "weights": [[float(v) for v in row] for row in model.weights],
        "bias": [float(v) for v in model.bias],
        "config": asdict(config) if config is not None else None,
    }


def model_from_dict(payload: dict) -> LinearModel:
    if payload.get("kind") != MODEL_KIND:
        raise FormatError(f"expected kind {MODEL_KIND!r}, got {payload.get('kind')!r}")
    return LinearModel(
        np.asarray(payload["weights"], dtype=np.float64),
        np.asarray(payload["bias"], dtype=np.float64),
        LabelSpace.of(payload["label_space"]),
    )


def save_model(model: LinearModel, path: str | Path, config: TrainConfig | None = None) -> None:
    try:
        with atomic_write(path) as handle:
            json.dump(model_to_dict(model, config), handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write model {path}: {exc}") from exc


def load_model(path: str | Path) -> LinearModel:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise IoError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_dict(payload)
