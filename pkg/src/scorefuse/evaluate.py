"""Evaluation protocol: stratified splitting, metrics, and reports.

Reports juxtapose the numbers measured by this pipeline with the reference
accuracies recorded for the two public brain-MRI datasets. The reference
entries are reported values from the original studies; this engine never
claims to reproduce them, and every report marks the two sources apart.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyMatrixError,
    MissingLabelsError,
    TinyClassError,
    ValidationError,
)
from .io import DatasetManifest, atomic_write
from .types import ConfusionMatrix, ScoreTable, argmax_class

REPORT_VERSION = "report_v1"

BASELINE_SOURCE = "paper-reported (not reproduced)"
MEASURED_SOURCE = "measured"


@dataclass(frozen=True)
class Baseline:
    dataset: str
    model: str
    accuracy_percent: float


# Recorded reference accuracies for the two public datasets, kept for
# report context only. dataset1 is the binary detection task, dataset2 the
# four-class typing task; the last row is the published two-model ensemble.
REFERENCE_BASELINES: tuple[Baseline, ...] = (
    Baseline("dataset1", "densenet", 71.43),
    Baseline("dataset1", "resnet", 80.36),
    Baseline("dataset1", "efficientnet", 66.0),
    Baseline("dataset1", "vgg16", 80.63),
    Baseline("dataset2", "densenet", 84.32),
    Baseline("dataset2", "resnet", 50.0),
    Baseline("dataset2", "efficientnet", 77.0),
    Baseline("dataset2", "vit", 81.0),
    Baseline("ensemble", "vgg16+densenet", 91.07),
)


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/test id lists produced by a stratified split."""

    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    ratio: float
    seed: int

    def __post_init__(self) -> None:
        if set(self.train_ids) & set(self.test_ids):
            raise ValidationError("train and test ids overlap")


def stratified_split(manifest: DatasetManifest, ratio: float, seed: int) -> SplitAssignment:
    """Per class c with n_c samples, floor(ratio * n_c) go to train.

    The shuffle is seeded; classes are processed in label-space order, so
    the assignment is a pure function of (manifest, ratio, seed).
    """
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"ratio must lie in (0, 1), got {ratio}")
    counts = manifest.class_counts()
    for name, count in counts.items():
        if count < 2:
            raise TinyClassError(f"class {name!r} has {count} samples; need at least 2")
    rng = np.random.default_rng(seed)
    train_positions: list[int] = []
    test_positions: list[int] = []
    for name in manifest.label_space:
        positions = [i for i, e in enumerate(manifest.entries) if e.label == name]
        order = rng.permutation(len(positions))
        # Epsilon guards against 0.7 * 10 == 6.999...; ratio*n is meant exactly.
        n_train = math.floor(ratio * len(positions) + 1e-9)
        chosen = {positions[j] for j in order[:n_train]}
        train_positions.extend(sorted(chosen))
        test_positions.extend(sorted(set(positions) - chosen))
    train_positions.sort()
    test_positions.sort()
    ids = [e.sample_id for e in manifest.entries]
    return SplitAssignment(
        tuple(ids[i] for i in train_positions),
        tuple(ids[i] for i in test_positions),
        ratio,
        seed,
    )


def confusion(
    pred_table: ScoreTable, tie_policy: str = "first", seed: int | None = None
) -> ConfusionMatrix:
    """Count (true class, predicted class) pairs; empty tables give zeros."""
    if any(row.true_label is None for row in pred_table.rows):
        raise MissingLabelsError(f"table {pred_table.model_id!r} has unlabeled rows")
    k = len(pred_table.label_space)
    counts = np.zeros((k, k), dtype=np.int64)
    for row in pred_table.rows:
        t = pred_table.label_space.index(row.true_label)
        p = pred_table.label_space.index(
            argmax_class(row.probs, pred_table.label_space, tie_policy, seed)
        )
        counts[t, p] += 1
    return ConfusionMatrix(
        pred_table.label_space, tuple(tuple(int(v) for v in row) for row in counts)
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float
    per_class: dict[str, ClassMetrics]
    macro_f1: float


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def metrics(cm: ConfusionMatrix) -> EvalMetrics:
    """Accuracy, per-class precision/recall/F1 (0/0 defined as 0), macro-F1."""
    grid = cm.as_array()
    total = int(grid.sum())
    if total == 0:
        raise EmptyMatrixError("cannot compute metrics from an all-zero matrix")
    accuracy = float(np.trace(grid)) / total
    per_class: dict[str, ClassMetrics] = {}
    f1s = []
    for j, name in enumerate(cm.label_space):
        tp = float(grid[j, j])
        precision = _safe_div(tp, float(grid[:, j].sum()))
        recall = _safe_div(tp, float(grid[j, :].sum()))
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[name] = ClassMetrics(precision, recall, f1, int(grid[j, :].sum()))
        f1s.append(f1)
    return EvalMetrics(accuracy, per_class, float(np.mean(f1s)))


def build_report(
    eval_metrics: EvalMetrics,
    cm: ConfusionMatrix,
    run_meta: dict | None = None,
    ensemble_spec: dict | None = None,
) -> dict:
    """Assemble the versioned report document. Deterministic for equal inputs."""
    meta = {"dataset": None, "model_id": None, "split": None, "seed": None}
    meta.update(run_meta or {})
    meta["n_samples"] = cm.total
    return {
        "report_version": REPORT_VERSION,
        "run": meta,
        "label_space": list(cm.label_space.classes),
        "measured": {
            "source": MEASURED_SOURCE,
            "accuracy": eval_metrics.accuracy,
            "macro_f1": eval_metrics.macro_f1,
            "per_class": {
                name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for name, m in eval_metrics.per_class.items()
            },
            "confusion": [list(row) for row in cm.counts],
        },
        "ensemble_spec": ensemble_spec,
        "reference_baselines": {
            "source": BASELINE_SOURCE,
            "entries": [
                {"dataset": b.dataset, "model": b.model, "accuracy_percent": b.accuracy_percent}
                for b in REFERENCE_BASELINES
            ],
        },
        "notes": [
            "precision/recall with an empty denominator are defined as 0",
            "reference baselines are recorded values, not outputs of this pipeline",
        ],
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, path: str | Path) -> None:
    with atomic_write(path) as handle:
        handle.write(report_to_json(report))


def render_report_text(report: dict) -> str:
    """Fixed-width table rendering of a report, for standard output."""
    run = report["run"]
    measured = report["measured"]
    lines = [
        f"evaluation report ({report['report_version']})",
        f"model: {run.get('model_id')}  dataset: {run.get('dataset')}  "
        f"split: {run.get('split')}  samples: {run['n_samples']}",
        f"accuracy: {measured['accuracy']:.4f}  macro-F1: {measured['macro_f1']:.4f}",
        "",
        f"{'class':<16}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>10}",
    ]
    for name in report["label_space"]:
        m = measured["per_class"][name]
        lines.append(
            f"{name:<16}{m['precision']:>10.4f}{m['recall']:>10.4f}"
            f"{m['f1']:>10.4f}{m['support']:>10d}"
        )
    lines.append("")
    lines.append(f"reference baselines [{report['reference_baselines']['source']}]:")
    for entry in report["reference_baselines"]["entries"]:
        lines.append(
            f"  {entry['dataset']:<9} {entry['model']:<15} {entry['accuracy_percent']:.2f}%"
        )
    lines.append("")
    lines.append(f"measured numbers above [{measured['source']}] come from this run only.")
    return "\n".join(lines) + "\n"
