"""Two-stage fusion of a binary detector with a multiclass classifier.

The two models live in mismatched label spaces (``{no, yes}`` versus the
four tumor-type classes), so fusing them needs a lift: the binary "no" mass
maps onto the multiclass negative class, and the binary "yes" mass is
distributed over the tumor classes in proportion to the multiclass model's
own tumor split. Two rules ship:

* ``lift_proportional`` (default) — soft and information-preserving: lift
  the binary vector into the multiclass space, then blend it with the
  multiclass vector using a post-combiner.
* ``hard_gate`` — a triage rule: if the detector's "no" confidence clears a
  threshold, emit a one-hot negative; otherwise drop the negative class and
  renormalize the tumor classes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .combine import prob_average, weighted_average
from .errors import (
    FormatError,
    IoError,
    LabelSpaceMismatchError,
    MisalignedError,
    ValidationError,
)
from .io import atomic_write
from .types import LabelSpace, ProbVector, ScoreRow, ScoreTable

RULES = ("lift_proportional", "hard_gate")
POST_COMBINERS = ("prob_average", "weighted_average")


@dataclass(frozen=True)
class CascadeSpec:
    rule: str = "lift_proportional"
    gate_threshold: float = 0.5
    post_combiner: str = "prob_average"
    weights: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValidationError(f"unknown cascade rule {self.rule!r}")
        if not 0.0 < self.gate_threshold < 1.0:
            raise ValidationError(f"gate threshold must lie in (0, 1), got {self.gate_threshold}")
        if self.post_combiner not in POST_COMBINERS:
            raise ValidationError(f"unknown post combiner {self.post_combiner!r}")
        if self.post_combiner == "weighted_average":
            if self.weights is None or len(self.weights) != 2:
                raise ValidationError("weighted_average post combiner needs exactly 2 weights")
            arr = np.asarray(self.weights, dtype=np.float64)
            if np.any(arr < 0) or abs(float(arr.sum()) - 1.0) > 1e-9:
                raise ValidationError("post-combiner weights must be nonnegative and sum to 1")

    def to_json_dict(self) -> dict:
        return {
            "rule": self.rule,
            "gate_threshold": self.gate_threshold,
            "post_combiner": self.post_combiner,
            "weights": list(self.weights) if self.weights is not None else None,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "CascadeSpec":
        known = {"rule", "gate_threshold", "post_combiner", "weights"}
        if set(payload) - known:
            raise FormatError(f"unexpected cascade spec keys {sorted(set(payload) - known)}")
        weights = payload.get("weights")
        return cls(
            rule=payload.get("rule", "lift_proportional"),
            gate_threshold=payload.get("gate_threshold", 0.5),
            post_combiner=payload.get("post_combiner", "prob_average"),
            weights=tuple(weights) if weights is not None else None,
        )


def save_cascade_spec(spec: CascadeSpec, path: str | Path) -> None:
    with atomic_write(path) as handle:
        json.dump(spec.to_json_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_cascade_spec(path: str | Path) -> CascadeSpec:
    try:
        with open(path, encoding="utf-8") as handle:
            return CascadeSpec.from_json_dict(json.load(handle))
    except OSError as exc:
        raise IoError(f"cannot read cascade spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc


def _binary_split(
    bin_p: ProbVector, bin_space: LabelSpace, bin_negative: str
) -> tuple[float, float]:
    if len(bin_space) != 2 or bin_negative not in bin_space:
        raise LabelSpaceMismatchError(
            f"binary space must have 2 classes including {bin_negative!r}, "
            f"got {bin_space.classes}"
        )
    neg = bin_p.scores[bin_space.index(bin_negative)]
    return neg, 1.0 - neg


def lift_binary(
    bin_p: ProbVector,
    multi_p: ProbVector,
    bin_space: LabelSpace,
    multi_space: LabelSpace,
    bin_negative: str = "no",
    multi_negative: str = "no_tumor",
) -> ProbVector:
    """Lift a binary detector's vector into the multiclass space.

    The negative class keeps the binary "no" mass exactly; the binary "yes"
    mass splits across tumor classes proportionally to the multiclass
    model's tumor distribution. When that distribution carries no tumor
    mass at all, the "yes" mass spreads uniformly instead.
    """
    p_no, p_yes = _binary_split(bin_p, bin_space, bin_negative)
    if multi_negative not in multi_space:
        raise LabelSpaceMismatchError(
            f"{multi_negative!r} not among multiclass classes {multi_space.classes}"
        )
    neg_idx = multi_space.index(multi_negative)
    multi = multi_p.array
    tumor_mass = float(multi.sum() - multi[neg_idx])
    out = np.empty(len(multi_space))
    n_tumor = len(multi_space) - 1
    for j in range(len(multi_space)):
        if j == neg_idx:
            out[j] = p_no
        elif tumor_mass > 0.0:
            out[j] = p_yes * multi[j] / tumor_mass
        else:
            out[j] = p_yes / n_tumor
    return ProbVector(tuple(float(v) for v in out))


def _gate_row(
    bin_p: ProbVector,
    multi_p: ProbVector,
    bin_space: LabelSpace,
    multi_space: LabelSpace,
    threshold: float,
    bin_negative: str,
    multi_negative: str,
) -> ProbVector:
    p_no, _ = _binary_split(bin_p, bin_space, bin_negative)
    neg_idx = multi_space.index(multi_negative)
    if p_no >= threshold:
        scores = [0.0] * len(multi_space)
        scores[neg_idx] = 1.0
        return ProbVector(tuple(scores))
    multi = multi_p.array.copy()
    multi[neg_idx] = 0.0
    tumor_mass = float(multi.sum())
    if tumor_mass == 0.0:
        # Gate said tumor but the multiclass model put everything on
        # the negative class: fall back to a uniform tumor spread.
        n_tumor = len(multi_space) - 1
        multi = np.full(len(multi_space), 1.0 / n_tumor)
        multi[neg_idx] = 0.0
        return ProbVector(tuple(float(v) for v in multi))
    return ProbVector(tuple(float(v) for v in multi / tumor_mass))


def cascade_predict(
    bin_table: ScoreTable,
    multi_table: ScoreTable,
    spec: CascadeSpec,
    bin_negative: str = "no",
    multi_negative: str = "no_tumor",
) -> ScoreTable:
    """Fuse aligned binary and multiclass tables into one multiclass table.

    Tables must cover the same sample ids (any order); output rows follow
    the binary table's order and keep the multiclass table's true labels.
    """
    if multi_negative not in multi_table.label_space:
        raise LabelSpaceMismatchError(
            f"{multi_negative!r} not among {multi_table.label_space.classes}"
        )
    if set(bin_table.sample_ids) != set(multi_table.sample_ids):
        raise MisalignedError(
            f"tables {bin_table.model_id!r} and {multi_table.model_id!r} "
            "cover different sample ids"
        )
    multi_by_id = {row.sample_id: row for row in multi_table.rows}
    out_rows = []
    for bin_row in bin_table.rows:
        multi_row = multi_by_id[bin_row.sample_id]
        if spec.rule == "hard_gate":
            fused = _gate_row(
                bin_row.probs,
                multi_row.probs,
                bin_table.label_space,
                multi_table.label_space,
                spec.gate_threshold,
                bin_negative,
                multi_negative,
            )
        else:
            lifted = lift_binary(
                bin_row.probs,
                multi_row.probs,
                bin_table.label_space,
                multi_table.label_space,
                bin_negative,
                multi_negative,
            )
            pair: Sequence[ProbVector] = (lifted, multi_row.probs)
            if spec.post_combiner == "weighted_average":
                fused = weighted_average(pair, spec.weights)
            else:
                fused = prob_average(pair)
        out_rows.append(ScoreRow(bin_row.sample_id, fused, multi_row.true_label))
    model_id = f"cascade[{spec.rule}]({bin_table.model_id}+{multi_table.model_id})"
    return ScoreTable(multi_table.label_space, model_id, tuple(out_rows))
