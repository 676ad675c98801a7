"""Shared domain types: label spaces, probability vectors, score tables.

All types here are immutable values; every operation is a pure function, so
everything is safe to share across threads or processes.

Two tolerances govern probability handling:

* ``PROB_SUM_TOL`` (1e-9): a :class:`ProbVector` must sum to 1 within this.
* ``ROW_REPAIR_TOL`` (1e-3): ingestion (CSV readers) silently renormalizes
  rows whose sum drifts by at most this much — float32 rounding from
  external exporters must not hard-fail a pipeline — and rejects anything
  worse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    AllZeroError,
    LabelMismatchError,
    NegativeScoreError,
    ValidationError,
)

PROB_SUM_TOL = 1e-9
ROW_REPAIR_TOL = 1e-3

# Slack for clipping float roundoff at the [0, 1] boundary.
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class LabelSpace:
    """Ordered, fixed set of class names. Order is significant for a run."""

    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.classes:
            raise ValidationError("label space must contain at least one class")
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError(f"duplicate class names: {self.classes}")
        if any(not name for name in self.classes):
            raise ValidationError("class names must be non-empty")

    @classmethod
    def of(cls, names: Sequence[str]) -> "LabelSpace":
        return cls(tuple(names))

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self) -> Iterator[str]:
        return iter(self.classes)

    def __contains__(self, name: object) -> bool:
        return name in self.classes

    def index(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise LabelMismatchError(f"unknown class {name!r}; expected one of {self.classes}") from None


@dataclass(frozen=True)
class ProbVector:
    """Per-class probability distribution emitted by one classifier for one sample."""

    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.scores:
            raise ValidationError("probability vector must be non-empty")
        cleaned = []
        for s in self.scores:
            if not np.isfinite(s):
                raise ValidationError(f"non-finite probability {s!r}")
            if s < -_BOUND_SLACK or s > 1.0 + _BOUND_SLACK:
                raise ValidationError(f"probability {s!r} outside [0, 1]")
            cleaned.append(min(1.0, max(0.0, float(s))))
        total = float(np.sum(cleaned))
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1 within {PROB_SUM_TOL}")
        object.__setattr__(self, "scores", tuple(cleaned))

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=np.float64)


def renormalize(raw: Sequence[float]) -> ProbVector:
    """Scale nonnegative scores so they sum to exactly 1.

    The division is iterated to a floating-point fixed point, which makes the
    operation exactly idempotent: feeding the output back in reproduces it
    bit for bit.
    """
    values = np.asarray(raw, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("cannot renormalize an empty vector")
    if np.any(~np.isfinite(values)):
        raise ValidationError("cannot renormalize non-finite scores")
    if np.any(values < 0.0):
        raise NegativeScoreError(f"negative score in {list(values)}")
    if not np.any(values > 0.0):
        raise AllZeroError("all scores are zero; no distribution can be formed")
    for _ in range(32):
        total = values.sum()
        if total == 1.0:
            break
        scaled = values / total
        if np.array_equal(scaled, values):
            break
        values = scaled
    return ProbVector(tuple(float(v) for v in values))


def _tie_break(candidates: Sequence[int], tie_policy: str, seed: int | None) -> int:
    """Pick one index from equally good candidates.

    ``first`` (default) takes the lowest index — deterministic and
    test-friendly. ``random`` draws uniformly from the candidates with a
    seeded generator, for callers that want unbiased tie handling.
    """
    if tie_policy == "first":
        return int(candidates[0])
    if tie_policy == "random":
        rng = np.random.default_rng(0 if seed is None else seed)
        return int(candidates[rng.integers(0, len(candidates))])
    raise ValidationError(f"unknown tie policy {tie_policy!r}")


def argmax_index(
    scores: Sequence[float],
    tie_policy: str = "first",
    seed: int | None = None,
) -> int:
    """Index of the maximal raw score, with explicit tie handling.

    Works on arbitrary nonnegative raw scores, so callers can check
    decisions without renormalizing first.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("cannot take argmax of an empty vector")
    candidates = np.flatnonzero(arr == arr.max())
    return _tie_break(candidates, tie_policy, seed)


def argmax_class(
    p: ProbVector,
    label_space: LabelSpace,
    tie_policy: str = "first",
    seed: int | None = None,
) -> str:
    """Class holding the highest probability; ties resolved by ``tie_policy``."""
    if len(p) != len(label_space):
        raise LabelMismatchError(
            f"vector has {len(p)} entries for {len(label_space)} classes"
        )
    return label_space.classes[argmax_index(p.array, tie_policy, seed)]


@dataclass(frozen=True)
class ScoreRow:
    """One sample's probabilities, with an optional ground-truth label."""

    sample_id: str
    probs: ProbVector
    true_label: str | None = None


@dataclass(frozen=True)
class ScoreTable:
    """(sample x class) probability matrix for one model.

    The interchange unit between models and combiners: readers produce it,
    every fusion rule consumes it, writers serialize it.
    """

    label_space: LabelSpace
    model_id: str
    rows: tuple[ScoreRow, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for row in self.rows:
            if row.sample_id in seen:
                raise ValidationError(f"duplicate sample_id {row.sample_id!r}")
            seen.add(row.sample_id)
            if len(row.probs) != len(self.label_space):
                raise ValidationError(
                    f"row {row.sample_id!r} has {len(row.probs)} probabilities "
                    f"for {len(self.label_space)} classes"
                )
            if row.true_label is not None and row.true_label not in self.label_space:
                raise ValidationError(
                    f"row {row.sample_id!r} has unknown label {row.true_label!r}"
                )

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def sample_ids(self) -> tuple[str, ...]:
        return tuple(row.sample_id for row in self.rows)

    def prob_matrix(self) -> np.ndarray:
        """Row-per-sample probability matrix of shape (n, K)."""
        if not self.rows:
            return np.zeros((0, len(self.label_space)))
        return np.stack([row.probs.array for row in self.rows])

    def has_labels(self) -> bool:
        return bool(self.rows) and all(r.true_label is not None for r in self.rows)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts grid: rows are true classes, columns are predicted classes."""

    label_space: LabelSpace
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        k = len(self.label_space)
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise ValidationError(f"confusion matrix must be {k}x{k}")
        for row in self.counts:
            for c in row:
                if c < 0 or c != int(c):
                    raise ValidationError(f"count {c!r} is not a nonnegative integer")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.as_array().sum())
