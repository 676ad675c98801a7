"""The eight ensemble mechanisms, each an independently testable fusion rule.

Decision rules over frozen model outputs:

* majority voting, the max rule, probability averaging, weighted
  probability averaging (weights typically accuracy-proportional);

trained combiners over frozen model outputs:

* stacking (a linear meta-classifier on concatenated per-model
  probabilities, fed out-of-fold predictions), and a mixture of experts
  (a linear softmax gate on the raw features picks how much to trust each
  expert per sample);

and resampling ensembles that train their own members:

* bagging over bootstrap subsets aggregated by probability averaging, and
  multiclass boosting with the standard stagewise reweighting
  (alpha = ln((1-eps)/eps) + ln(K-1), weights scaled by exp(alpha) on the
  misses and renormalized each round).

Every fusion rule is pure and reentrant. Boosting rounds are inherently
sequential; bagging replicates are independent.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadWeightsError,
    DegenerateFirstRoundError,
    DimensionMismatchError,
    EmptyDatasetError,
    EmptyInputError,
    EmptyVotesError,
    FormatError,
    IoError,
    LabelMismatchError,
    MisalignedError,
    MissingLabelsError,
    ValidationError,
    WeightMismatchError,
)
from .linear import (
    LinearModel,
    TrainConfig,
    model_from_dict,
    model_to_dict,
    predict_matrix,
    predict_proba,
    train,
)
from .io import atomic_write
from .types import LabelSpace, ProbVector, ScoreRow, ScoreTable, _tie_break, argmax_class

METHODS = (
    "majority_vote",
    "max_rule",
    "prob_average",
    "weighted_average",
    "stacking",
    "mixture_of_experts",
    "bagging",
    "boosting",
)


# -- decision rules ------------------------------------------------------------

def majority_vote(
    votes: Sequence[str],
    label_space: LabelSpace,
    tie_policy: str = "first",
    seed: int | None = None,
) -> str:
    """Modal class among the votes.

    An even voter count is accepted (with a warning) even though voting
    panels are conventionally odd; ties fall to the tie policy.
    """
    if not votes:
        raise EmptyVotesError("majority vote requires at least one vote")
    if len(votes) % 2 == 0:
        warnings.warn(
            f"majority vote over an even number of voters ({len(votes)}); "
            "ties will be broken by policy",
            stacklevel=2,
        )
    counts = np.zeros(len(label_space), dtype=np.int64)
    for v in votes:
        counts[label_space.index(v)] += 1
    candidates = np.flatnonzero(counts == counts.max())
    return label_space.classes[_tie_break(candidates, tie_policy, seed)]


def max_confidence_cell(
    grid: np.ndarray,
    tie_policy: str = "first",
    seed: int | None = None,
) -> tuple[int, int]:
    """(model index, class index) of the globally maximal score cell.

    Accepts raw (not necessarily normalized) score grids; the default policy
    scans ties in (model, class) order.
    """
    arr = np.asarray(grid, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInputError("empty score grid")
    flat = arr.reshape(-1)
    candidates = np.flatnonzero(flat == flat.max())
    chosen = _tie_break(candidates, tie_policy, seed)
    return divmod(chosen, arr.shape[1])


def max_rule(
    per_model: Sequence[ProbVector],
    label_space: LabelSpace,
    tie_policy: str = "first",
    seed: int | None = None,
) -> str:
    """Class behind the single most confident (model, class) cell.

    Ties scan in (model index, class index) order under the default policy.
    """
    _check_vectors(per_model, label_space)
    grid = np.stack([p.array for p in per_model])  # (M, K)
    _, class_idx = max_confidence_cell(grid, tie_policy, seed)
    return label_space.classes[class_idx]


def prob_average(per_model: Sequence[ProbVector]) -> ProbVector:
    """Arithmetic mean of the per-class probabilities across models."""
    if not per_model:
        raise EmptyInputError("probability averaging requires at least one model")
    _check_same_arity(per_model)
    mean = np.stack([p.array for p in per_model]).mean(axis=0)
    return ProbVector(tuple(float(v) for v in mean))


def weighted_average(per_model: Sequence[ProbVector], weights: Sequence[float]) -> ProbVector:
    """Convex combination sum_i w_i * p_i of the models' distributions."""
    if not per_model:
        raise EmptyInputError("weighted averaging requires at least one model")
    _check_same_arity(per_model)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(per_model),):
        raise WeightMismatchError(f"{w.size} weights for {len(per_model)} models")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise BadWeightsError(f"weights must be nonnegative and sum to 1, got {list(w)}")
    mixed = (w[:, None] * np.stack([p.array for p in per_model])).sum(axis=0)
    return ProbVector(tuple(float(v) for v in mixed))


def table_accuracy(table: ScoreTable, tie_policy: str = "first") -> float:
    """Fraction of rows whose argmax matches the true label."""
    if not table.has_labels():
        raise MissingLabelsError(f"table {table.model_id!r} lacks true labels")
    correct = sum(
        1
        for row in table.rows
        if argmax_class(row.probs, table.label_space, tie_policy) == row.true_label
    )
    return correct / len(table.rows)


def accuracy_weights(validation_tables: Sequence[ScoreTable]) -> tuple[float, ...]:
    """Accuracy-proportional combiner weights, w_i = acc_i / sum(acc).

    Falls back to uniform weights when every model scores zero.
    """
    if not validation_tables:
        raise EmptyInputError("need at least one validation table")
    _check_aligned(validation_tables)
    accs = np.asarray([table_accuracy(t) for t in validation_tables])
    total = accs.sum()
    if total == 0.0:
        return tuple([1.0 / len(accs)] * len(accs))
    return tuple(float(a / total) for a in accs)


def _simplex_grid(n_models: int, resolution: int):
    """All weight vectors with components k/resolution summing to 1."""
    if n_models == 1:
        yield (1.0,)
        return

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first, *rest)

    for combo in compositions(resolution, n_models):
        yield tuple(k / resolution for k in combo)


def grid_search_weights(
    validation_tables: Sequence[ScoreTable], resolution: int = 10
) -> tuple[float, ...]:
    """Optional alternative to accuracy-proportional weighting: exhaustive
    search over the simplex grid (step 1/resolution) for the weight vector
    whose weighted average scores best on the validation tables.

    Deterministic: ties keep the first maximizer in enumeration order.
    Exponential in the number of models, intended for small ensembles.
    """
    if not validation_tables:
        raise EmptyInputError("need at least one validation table")
    if resolution < 1:
        raise ValidationError(f"resolution must be >= 1, got {resolution}")
    _check_aligned(validation_tables)
    for t in validation_tables:
        if not t.has_labels():
            raise MissingLabelsError(f"table {t.model_id!r} lacks true labels")
    space = validation_tables[0].label_space
    stacked = np.stack([t.prob_matrix() for t in validation_tables])  # (M, n, K)
    truth = np.asarray(
        [space.index(row.true_label) for row in validation_tables[0].rows]
    )
    best_weights, best_acc = None, -1.0
    for weights in _simplex_grid(len(validation_tables), resolution):
        mixed = np.tensordot(np.asarray(weights), stacked, axes=1)  # (n, K)
        acc = float((mixed.argmax(axis=1) == truth).mean())
        if acc > best_acc:
            best_weights, best_acc = weights, acc
    return best_weights


def _check_vectors(per_model: Sequence[ProbVector], label_space: LabelSpace) -> None:
    if not per_model:
        raise EmptyInputError("need at least one model output")
    for p in per_model:
        if len(p) != len(label_space):
            raise LabelMismatchError(
                f"vector arity {len(p)} does not match {len(label_space)} classes"
            )


def _check_same_arity(per_model: Sequence[ProbVector]) -> None:
    arity = len(per_model[0])
    for p in per_model[1:]:
        if len(p) != arity:
            raise LabelMismatchError("model outputs differ in class count")


# -- stacking -------------------------------------------------------------------

def kfold_indices(n: int, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded K-fold partition: list of (train_idx, held_out_idx) pairs."""
    if folds < 2 or folds > n:
        raise ValidationError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    order = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(order, folds)
    out = []
    for i, held in enumerate(chunks):
        rest = np.concatenate([c for j, c in enumerate(chunks) if j != i])
        out.append((np.sort(rest), np.sort(held)))
    return out


@dataclass(frozen=True)
class OofResult:
    """Out-of-fold predictions plus the provenance needed to audit them."""

    table: ScoreTable
    fold_of: dict[str, int]
    fold_train_ids: tuple[tuple[str, ...], ...]
    fold_models: tuple[LinearModel, ...]


def oof_table(
    features: np.ndarray,
    labels: Sequence[str],
    sample_ids: Sequence[str],
    label_space: LabelSpace,
    config: TrainConfig,
    model_id: str,
    folds: int = 5,
    seed: int = 0,
) -> OofResult:
    """Train one base-learner configuration per fold; every row's probabilities
    come from the model whose training fold excluded that row."""
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    if n != len(labels) or n != len(sample_ids):
        raise MisalignedError("features, labels and sample_ids must share length")
    probs = np.zeros((n, len(label_space)))
    fold_of: dict[str, int] = {}
    fold_train_ids = []
    fold_models = []
    for fold, (train_idx, held_idx) in enumerate(kfold_indices(n, folds, seed)):
        member = train(X[train_idx], [labels[i] for i in train_idx], label_space, config)
        probs[held_idx] = predict_matrix(member, X[held_idx])
        for i in held_idx:
            fold_of[sample_ids[i]] = fold
        fold_train_ids.append(tuple(sample_ids[i] for i in train_idx))
        fold_models.append(member)
    rows = tuple(
        ScoreRow(sample_ids[i], ProbVector(tuple(float(v) for v in probs[i])), labels[i])
        for i in range(n)
    )
    return OofResult(
        ScoreTable(label_space, model_id, rows),
        fold_of,
        tuple(fold_train_ids),
        tuple(fold_models),
    )


def stack_features(per_model: Sequence[ProbVector]) -> np.ndarray:
    """Concatenate per-model probabilities into one meta-feature vector."""
    if not per_model:
        raise EmptyInputError("need at least one model output")
    return np.concatenate([p.array for p in per_model])


def stacking_train(base_tables: Sequence[ScoreTable], config: TrainConfig) -> LinearModel:
    """Fit the meta-classifier on concatenated base probabilities (d = M*K).

    The caller is responsible for feeding out-of-fold base predictions (see
    :func:`oof_table`); training the meta-learner on in-fold scores leaks
    the base models' training fit.
    """
    _check_aligned(base_tables)
    for t in base_tables:
        if not t.has_labels():
            raise MissingLabelsError(f"table {t.model_id!r} lacks true labels")
    meta_x = np.hstack([t.prob_matrix() for t in base_tables])
    labels = [row.true_label for row in base_tables[0].rows]
    return train(meta_x, labels, base_tables[0].label_space, config)


def stacking_predict(meta: LinearModel, per_model: Sequence[ProbVector]) -> ProbVector:
    f = stack_features(per_model)
    if f.size != meta.n_features:
        raise DimensionMismatchError(
            f"{f.size} stacked features vs meta dimension {meta.n_features}"
        )
    return predict_proba(meta, f)


# -- mixture of experts ----------------------------------------------------------

def gate_space(n_experts: int) -> LabelSpace:
    """Pseudo label space for the gating model's expert axis."""
    return LabelSpace.of(tuple(f"expert_{m}" for m in range(n_experts)))


def moe_loss_and_grad(
    gate: LinearModel,
    features: np.ndarray,
    expert_probs: np.ndarray,
    label_idx: np.ndarray,
    l2: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy of the gated mixture sum_m g_m(x) p_m, with its gradient.

    ``expert_probs`` has shape (n, M, K). The mixture probability of the true
    class is floored at 1e-12 so a unanimous zero cannot produce -inf.
    """
    X = np.asarray(features, dtype=np.float64)
    P = np.asarray(expert_probs, dtype=np.float64)
    n, n_experts, _ = P.shape
    if X.shape[0] != n:
        raise MisalignedError(f"{X.shape[0]} feature rows vs {n} expert rows")
    if gate.weights.shape[0] != n_experts:
        raise DimensionMismatchError(
            f"gate has {gate.weights.shape[0]} outputs for {n_experts} experts"
        )
    logits = X @ gate.weights.T + gate.bias
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    G = shifted / shifted.sum(axis=1, keepdims=True)  # (n, M)
    rows = np.arange(n)
    p_true = P[rows, :, label_idx]  # (n, M)
    mix_true = np.maximum((G * p_true).sum(axis=1), 1e-12)
    loss = float(-np.log(mix_true).mean() + 0.5 * l2 * float((gate.weights**2).sum()))

    a = -p_true / mix_true[:, None]  # dL_i / dG_im
    inner = (G * a).sum(axis=1, keepdims=True)
    dz = G * (a - inner) / n
    grad_w = dz.T @ X + l2 * gate.weights
    grad_b = dz.sum(axis=0)
    return loss, grad_w, grad_b


def _expert_tensor(base_tables: Sequence[ScoreTable]) -> np.ndarray:
    return np.stack([t.prob_matrix() for t in base_tables], axis=1)  # (n, M, K)


def moe_train(
    features: np.ndarray,
    base_tables: Sequence[ScoreTable],
    labels: Sequence[str],
    config: TrainConfig,
) -> LinearModel:
    """Fit the gating network by SGD on the mixed-prediction cross-entropy.

    Zero initialization makes the starting mixture exactly the uniform
    average of the experts. Same determinism contract as the base learner.
    """
    _check_aligned(base_tables)
    X = np.asarray(features, dtype=np.float64)
    P = _expert_tensor(base_tables)
    n = P.shape[0]
    if X.ndim != 2 or X.shape[0] != n or len(labels) != n:
        raise MisalignedError("features, labels and tables must share the sample axis")
    space = base_tables[0].label_space
    y_idx = np.asarray([space.index(lab) for lab in labels], dtype=np.int64)

    g_space = gate_space(len(base_tables))
    weights = np.zeros((len(base_tables), X.shape[1]))
    bias = np.zeros(len(base_tables))
    rng = np.random.default_rng(config.seed)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            gate = LinearModel(weights, bias, g_space)
            loss, grad_w, grad_b = moe_loss_and_grad(
                gate, X[batch], P[batch], y_idx[batch], config.l2
            )
            if not math.isfinite(loss):
                raise ValidationError(f"gate training loss became {loss}")
            weights = weights - config.learning_rate * grad_w
            bias = bias - config.learning_rate * grad_b
    return LinearModel(weights, bias, g_space)


def moe_predict(
    gate: LinearModel,
    features: np.ndarray,
    per_model: Sequence[ProbVector],
) -> ProbVector:
    """Input-dependent convex combination sum_m softmax(gate(x))_m * p_m."""
    if not per_model:
        raise EmptyInputError("need at least one expert")
    _check_same_arity(per_model)
    if gate.weights.shape[0] != len(per_model):
        raise DimensionMismatchError(
            f"gate has {gate.weights.shape[0]} outputs for {len(per_model)} experts"
        )
    g = predict_matrix(gate, np.asarray(features, dtype=np.float64))[0]
    mixed = (g[:, None] * np.stack([p.array for p in per_model])).sum(axis=0)
    return ProbVector(tuple(float(v) for v in mixed))


# -- bagging ---------------------------------------------------------------------

def bootstrap_sample(n: int, seed: int) -> np.ndarray:
    """n uniform draws with replacement from range(n); deterministic per seed."""
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    return np.random.default_rng(seed).integers(0, n, size=n)


@dataclass(frozen=True)
class BagEnsemble:
    """Bootstrap-trained replicates, aggregated by probability averaging."""

    replicates: tuple[LinearModel, ...]
    label_space: LabelSpace

    def __post_init__(self) -> None:
        if not self.replicates:
            raise ValidationError("bag ensemble needs at least one replicate")
        for m in self.replicates:
            if m.label_space != self.label_space:
                raise LabelMismatchError("replicates must share the ensemble label space")


def bagging_train(
    features: np.ndarray,
    labels: Sequence[str],
    label_space: LabelSpace,
    replicates: int,
    config: TrainConfig,
    seed: int,
    bootstrap: bool = True,
) -> BagEnsemble:
    """Train ``replicates`` members on bootstrap subsets (seeds seed+i).

    ``bootstrap=False`` trains every member on the untouched dataset, which
    makes a single-member bag coincide with a plain :func:`train` call.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError(f"need a non-empty 2-D feature matrix, got {X.shape}")
    if replicates < 1:
        raise ValidationError(f"need replicates >= 1, got {replicates}")
    n = X.shape[0]
    members = []
    for i in range(replicates):
        idx = bootstrap_sample(n, seed + i) if bootstrap else np.arange(n)
        members.append(train(X[idx], [labels[j] for j in idx], label_space, config))
    return BagEnsemble(tuple(members), label_space)


def bag_predict_matrix(ens: BagEnsemble, features: np.ndarray) -> np.ndarray:
    stacked = np.stack([predict_matrix(m, features) for m in ens.replicates])
    return stacked.mean(axis=0)


def bag_predict_proba(ens: BagEnsemble, features: np.ndarray) -> ProbVector:
    probs = bag_predict_matrix(ens, np.atleast_2d(np.asarray(features, dtype=np.float64)))[0]
    return ProbVector(tuple(float(v) for v in probs))


def bag_predict(ens: BagEnsemble, features: np.ndarray, tie_policy: str = "first") -> str:
    return argmax_class(bag_predict_proba(ens, features), ens.label_space, tie_policy)


# -- boosting --------------------------------------------------------------------

@dataclass(frozen=True)
class BoostEnsemble:
    """Stagewise learners with their vote weights alpha."""

    stages: tuple[tuple[LinearModel, float], ...]
    label_space: LabelSpace

    def __post_init__(self) -> None:
        if not self.stages:
            raise ValidationError("boost ensemble needs at least one stage")
        for model, alpha in self.stages:
            if not math.isfinite(alpha):
                raise ValidationError(f"stage weight {alpha} is not finite")
            if model.label_space != self.label_space:
                raise LabelMismatchError("stages must share the ensemble label space")


def boost_alpha(error: float, n_classes: int) -> float:
    """Stage weight ln((1-eps)/eps) + ln(K-1); positive iff better than chance."""
    return math.log((1.0 - error) / error) + math.log(n_classes - 1)


def boost_round(
    w: np.ndarray, miss: np.ndarray, n_classes: int
) -> tuple[float, float | None, np.ndarray]:
    """One round of the stagewise weight update.

    Given the current distribution ``w`` (sums to 1) and the miss mask of
    the round's learner, returns (eps, alpha, next_w):

    * eps >= 1 - 1/K (no better than chance): alpha is None, the stage must
      be dropped and boosting halts;
    * eps == 0 (perfect learner): the stage is kept with alpha = 1.0 and
      boosting halts with the distribution unchanged;
    * otherwise alpha = ln((1-eps)/eps) + ln(K-1) > 0 and next_w scales the
      missed samples by exp(alpha), renormalized to sum 1.
    """
    eps = float(w[miss].sum())
    if eps >= 1.0 - 1.0 / n_classes:
        return eps, None, w.copy()
    if eps == 0.0:
        return eps, 1.0, w.copy()
    alpha = boost_alpha(eps, n_classes)
    new_w = w * np.exp(alpha * miss)
    return eps, alpha, new_w / new_w.sum()


def boosting_train(
    features: np.ndarray,
    labels: Sequence[str],
    label_space: LabelSpace,
    rounds: int,
    config: TrainConfig,
    weight_log: list[np.ndarray] | None = None,
) -> BoostEnsemble:
    """Stagewise reweighted training (multiclass, discrete votes).

    Each round trains the base learner under the current sample
    distribution, measures the weighted error eps, keeps the stage with
    alpha = ln((1-eps)/eps) + ln(K-1), scales the missed samples' weights by
    exp(alpha) and renormalizes. Halts early when a learner is no better
    than chance (eps >= 1 - 1/K) or perfect (eps == 0; the perfect stage is
    kept with alpha 1.0). ``weight_log``, when supplied, collects the
    distribution after every completed round.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError(f"need a non-empty 2-D feature matrix, got {X.shape}")
    if rounds < 1:
        raise ValidationError(f"need rounds >= 1, got {rounds}")
    n = X.shape[0]
    if len(labels) != n:
        raise DimensionMismatchError(f"{len(labels)} labels for {n} samples")
    k = len(label_space)
    y_idx = np.asarray([label_space.index(lab) for lab in labels], dtype=np.int64)
    chance = 1.0 - 1.0 / k

    w = np.full(n, 1.0 / n)
    stages: list[tuple[LinearModel, float]] = []
    for t in range(rounds):
        learner = train(X, labels, label_space, config, sample_weights=w)
        pred_idx = predict_matrix(learner, X).argmax(axis=1)
        miss = pred_idx != y_idx
        eps, alpha, next_w = boost_round(w, miss, k)
        if alpha is None:
            if t == 0:
                raise DegenerateFirstRoundError(
                    f"first learner's weighted error {eps:.4f} >= {chance:.4f}"
                )
            break
        stages.append((learner, alpha))
        w = next_w
        if weight_log is not None:
            weight_log.append(w.copy())
        if eps == 0.0:
            break
    return BoostEnsemble(tuple(stages), label_space)


def boosting_vote_scores(ens: BoostEnsemble, features: np.ndarray) -> np.ndarray:
    """Per-class sum of stage weights alpha over the stages voting for it."""
    scores = np.zeros(len(ens.label_space))
    for model, alpha in ens.stages:
        scores[int(np.argmax(predict_matrix(model, features)[0]))] += alpha
    return scores


def boosting_predict(
    ens: BoostEnsemble,
    features: np.ndarray,
    tie_policy: str = "first",
    seed: int | None = None,
) -> str:
    if np.asarray(features).reshape(-1).size != ens.stages[0][0].n_features:
        raise DimensionMismatchError("feature dimension does not match ensemble stages")
    scores = boosting_vote_scores(ens, features)
    candidates = np.flatnonzero(scores == scores.max())
    return ens.label_space.classes[_tie_break(candidates, tie_policy, seed)]


# -- table-level fusion ------------------------------------------------------------

def _check_aligned(tables: Sequence[ScoreTable]) -> None:
    if not tables:
        raise EmptyInputError("need at least one score table")
    first = tables[0]
    for t in tables[1:]:
        if t.label_space != first.label_space:
            raise LabelMismatchError(
                f"tables {first.model_id!r} and {t.model_id!r} disagree on label space"
            )
        if t.sample_ids != first.sample_ids:
            raise MisalignedError(
                f"tables {first.model_id!r} and {t.model_id!r} disagree on sample ids"
            )
        for a, b in zip(first.rows, t.rows):
            if a.true_label is not None and b.true_label is not None and a.true_label != b.true_label:
                raise MisalignedError(
                    f"sample {a.sample_id!r} carries conflicting true labels"
                )


def _one_hot(label_space: LabelSpace, name: str) -> ProbVector:
    scores = [0.0] * len(label_space)
    scores[label_space.index(name)] = 1.0
    return ProbVector(tuple(scores))


def fuse_tables(
    method: str,
    tables: Sequence[ScoreTable],
    weights: Sequence[float] | None = None,
    meta: LinearModel | None = None,
    gate: LinearModel | None = None,
    features: np.ndarray | None = None,
    tie_policy: str = "first",
    seed: int | None = None,
) -> ScoreTable:
    """Apply one fusion rule across aligned tables, row by row.

    Decision rules (majority_vote, max_rule) emit one-hot rows; the soft
    rules emit blended distributions. ``stacking`` needs ``meta``;
    ``mixture_of_experts`` needs ``gate`` plus per-sample ``features``.
    """
    if method not in ("majority_vote", "max_rule", "prob_average", "weighted_average",
                      "stacking", "mixture_of_experts"):
        raise ValidationError(f"method {method!r} is not a table-level fusion rule")
    _check_aligned(tables)
    space = tables[0].label_space
    if method == "stacking" and meta is None:
        raise ValidationError("stacking fusion requires a meta model")
    if method == "mixture_of_experts":
        if gate is None:
            raise ValidationError("mixture_of_experts fusion requires a gate model")
        if features is None or np.asarray(features).shape[0] != len(tables[0]):
            raise MisalignedError("mixture_of_experts fusion requires per-row features")

    out_rows = []
    for i, base_row in enumerate(tables[0].rows):
        per_model = [t.rows[i].probs for t in tables]
        if method == "majority_vote":
            votes = [argmax_class(p, space, tie_policy, seed) for p in per_model]
            fused = _one_hot(space, majority_vote(votes, space, tie_policy, seed))
        elif method == "max_rule":
            fused = _one_hot(space, max_rule(per_model, space, tie_policy, seed))
        elif method == "prob_average":
            fused = prob_average(per_model)
        elif method == "weighted_average":
            if weights is None:
                raise BadWeightsError("weighted_average requires weights")
            fused = weighted_average(per_model, weights)
        elif method == "stacking":
            fused = stacking_predict(meta, per_model)
        else:
            fused = moe_predict(gate, np.asarray(features)[i], per_model)
        true = next((t.rows[i].true_label for t in tables if t.rows[i].true_label), None)
        out_rows.append(ScoreRow(base_row.sample_id, fused, true))
    model_id = f"{method}({'+'.join(t.model_id for t in tables)})"
    return ScoreTable(space, model_id, tuple(out_rows))


# -- declarative specs and persistence ----------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of a fusion strategy: method tag plus parameters."""

    method: str
    params: dict

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValidationError(f"unknown ensemble method {self.method!r}")
        w = self.params.get("weights")
        if w is not None:
            arr = np.asarray(w, dtype=np.float64)
            if np.any(arr < 0) or abs(float(arr.sum()) - 1.0) > 1e-9:
                raise BadWeightsError("spec weights must be nonnegative and sum to 1")
        for key in ("replicates", "rounds"):
            value = self.params.get(key)
            if value is not None and (int(value) != value or value < 1):
                raise ValidationError(f"{key} must be a positive integer, got {value!r}")

    def to_json_dict(self) -> dict:
        return {"method": self.method, "params": self.params}

    @classmethod
    def from_json_dict(cls, payload: dict) -> "EnsembleSpec":
        if set(payload) - {"method", "params"}:
            raise FormatError(f"unexpected spec keys {sorted(set(payload) - {'method', 'params'})}")
        return cls(payload["method"], dict(payload.get("params") or {}))


def save_spec(spec: EnsembleSpec, path: str | Path) -> None:
    with atomic_write(path) as handle:
        json.dump(spec.to_json_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_spec(path: str | Path) -> EnsembleSpec:
    try:
        with open(path, encoding="utf-8") as handle:
            return EnsembleSpec.from_json_dict(json.load(handle))
    except OSError as exc:
        raise IoError(f"cannot read ensemble spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc


BAG_KIND = "bag_ensemble"
BOOST_KIND = "boost_ensemble"


def save_ensemble(ens: BagEnsemble | BoostEnsemble, path: str | Path) -> None:
    """Persist an ensemble as a JSON bundle of its member models."""
    if isinstance(ens, BagEnsemble):
        payload = {
            "kind": BAG_KIND,
            "label_space": list(ens.label_space.classes),
            "members": [model_to_dict(m) for m in ens.replicates],
        }
    elif isinstance(ens, BoostEnsemble):
        payload = {
            "kind": BOOST_KIND,
            "label_space": list(ens.label_space.classes),
            "stages": [
                {"alpha": float(alpha), "model": model_to_dict(m)} for m, alpha in ens.stages
            ],
        }
    else:
        raise ValidationError(f"cannot serialize {type(ens).__name__}")
    try:
        with atomic_write(path) as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write ensemble {path}: {exc}") from exc


def load_ensemble(path: str | Path) -> BagEnsemble | BoostEnsemble:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise IoError(f"cannot read ensemble {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    kind = payload.get("kind")
    space = LabelSpace.of(payload.get("label_space", ()))
    if kind == BAG_KIND:
        return BagEnsemble(
            tuple(model_from_dict(m) for m in payload["members"]), space
        )
    if kind == BOOST_KIND:
        return BoostEnsemble(
            tuple((model_from_dict(s["model"]), float(s["alpha"])) for s in payload["stages"]),
            space,
        )
    raise FormatError(f"{path}: unknown ensemble kind {kind!r}")
