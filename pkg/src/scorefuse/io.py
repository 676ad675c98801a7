"""Readers and writers for the pipeline's file formats.

These formats are the cross-language boundary contract; any ecosystem able
to write CSV can feed this engine.

Score table CSV (UTF-8, LF, header row)::

    sample_id,true_label,<class_1>,...,<class_K>

Class columns carry the label-space names in order; ``true_label`` may be
empty. Probabilities are serialized with 12 significant digits, so a write
followed by a read reproduces a table to 12 significant digits.

Manifest CSV::

    sample_id,path,label

Feature CSV (produced by ``featurize``, consumed by the trainers)::

    sample_id,label,f0,...,f{d-1}

Feature values are serialized with full float64 precision (17 significant
digits) and round-trip exactly. All writers are atomic: output appears under
its final name only once complete.
"""

from __future__ import annotations

import csv
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import FormatError, IoError, ValidationError
from .types import (
    ROW_REPAIR_TOL,
    LabelSpace,
    ProbVector,
    ScoreRow,
    ScoreTable,
    renormalize,
)


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    path: str
    label: str


@dataclass(frozen=True)
class DatasetManifest:
    """Listing of samples on disk: ids, relative paths, and class labels."""

    label_space: LabelSpace
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if e.sample_id in seen:
                raise ValidationError(f"duplicate sample_id {e.sample_id!r}")
            seen.add(e.sample_id)
            if not e.path:
                raise ValidationError(f"entry {e.sample_id!r} has an empty path")
            if e.label not in self.label_space:
                raise ValidationError(
                    f"entry {e.sample_id!r} has label {e.label!r} outside "
                    f"{self.label_space.classes}"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in self.label_space}
        for e in self.entries:
            counts[e.label] += 1
        return counts


@contextmanager
def atomic_write(path: str | Path, mode: str = "w") -> Iterator:
    """Write to a sibling temp file, then rename into place on success."""
    path = Path(path)
    try:
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise IoError(f"cannot create temp file next to {path}: {exc}") from exc
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": ""}
        with os.fdopen(fd, mode, **kwargs) as handle:
            yield handle
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _format_prob(value: float) -> str:
    return f"{value:.12g}"


def write_score_table(table: ScoreTable, path: str | Path) -> None:
    """Serialize a table; class column order equals label-space order."""
    try:
        with atomic_write(path) as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["sample_id", "true_label", *table.label_space.classes])
            for row in table.rows:
                writer.writerow(
                    [
                        row.sample_id,
                        row.true_label or "",
                        *(_format_prob(p) for p in row.probs.scores),
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write score table {path}: {exc}") from exc


def read_score_table(path: str | Path, model_id: str | None = None) -> ScoreTable:
    """Parse and validate a score table CSV.

    Rows whose probabilities sum within ``ROW_REPAIR_TOL`` of 1 are silently
    renormalized; larger drift is rejected. ``model_id`` defaults to the file
    stem (the CSV itself carries no model identity).
    """
    path = Path(path)
    try:
        text_rows = _read_csv_rows(path)
    except OSError as exc:
        raise IoError(f"cannot read score table {path}: {exc}") from exc
    if not text_rows:
        raise FormatError(f"{path}: empty file, expected a header row")
    header = text_rows[0]
    if len(header) < 3 or header[0] != "sample_id" or header[1] != "true_label":
        raise FormatError(
            f"{path}: header must be 'sample_id,true_label,<classes...>', got {header}"
        )
    label_space = LabelSpace.of(header[2:])
    rows: list[ScoreRow] = []
    seen: set[str] = set()
    for lineno, record in enumerate(text_rows[1:], start=2):
        if len(record) != len(header):
            raise FormatError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(record)}"
            )
        sample_id, true_label, *score_text = record
        if sample_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate sample_id {sample_id!r}")
        seen.add(sample_id)
        try:
            raw = [float(s) for s in score_text]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric probability: {exc}") from exc
        for value in raw:
            if not np.isfinite(value) or value < 0.0 or value > 1.0:
                raise ValidationError(
                    f"{path}:{lineno}: probability {value!r} outside [0, 1]"
                )
        total = float(np.sum(raw))
        if abs(total - 1.0) > ROW_REPAIR_TOL:
            raise ValidationError(
                f"{path}:{lineno}: probabilities sum to {total}, beyond the "
                f"{ROW_REPAIR_TOL} repair tolerance"
            )
        probs = renormalize(raw)
        label = true_label or None
        if label is not None and label not in label_space:
            raise ValidationError(f"{path}:{lineno}: unknown label {label!r}")
        rows.append(ScoreRow(sample_id, probs, label))
    return ScoreTable(label_space, model_id or path.stem, tuple(rows))


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    try:
        with atomic_write(path) as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["sample_id", "path", "label"])
            for e in manifest.entries:
                writer.writerow([e.sample_id, e.path, e.label])
    except OSError as exc:
        raise IoError(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path: str | Path, label_space: LabelSpace) -> DatasetManifest:
    path = Path(path)
    try:
        text_rows = _read_csv_rows(path)
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    if not text_rows:
        raise FormatError(f"{path}: empty file, expected a header row")
    if text_rows[0] != ["sample_id", "path", "label"]:
        raise FormatError(
            f"{path}: header must be 'sample_id,path,label', got {text_rows[0]}"
        )
    entries = []
    for lineno, record in enumerate(text_rows[1:], start=2):
        if len(record) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(record)}")
        entries.append(ManifestEntry(*record))
    return DatasetManifest(label_space, tuple(entries))


def write_feature_table(
    path: str | Path,
    sample_ids: Sequence[str],
    features: np.ndarray,
    labels: Sequence[str | None] | None = None,
) -> None:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != len(sample_ids):
        raise ValidationError(
            f"feature matrix shape {features.shape} does not match {len(sample_ids)} ids"
        )
    if labels is not None and len(labels) != len(sample_ids):
        raise ValidationError("labels and sample_ids differ in length")
    try:
        with atomic_write(path) as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["sample_id", "label", *(f"f{j}" for j in range(features.shape[1]))])
            for i, sid in enumerate(sample_ids):
                label = labels[i] if labels is not None else None
                writer.writerow([sid, label or "", *(repr(float(v)) for v in features[i])])
    except OSError as exc:
        raise IoError(f"cannot write feature table {path}: {exc}") from exc


def read_feature_table(
    path: str | Path,
) -> tuple[tuple[str, ...], tuple[str | None, ...], np.ndarray]:
    """Returns (sample_ids, labels, feature matrix); absent labels are None."""
    path = Path(path)
    try:
        text_rows = _read_csv_rows(path)
    except OSError as exc:
        raise IoError(f"cannot read feature table {path}: {exc}") from exc
    if not text_rows:
        raise FormatError(f"{path}: empty file, expected a header row")
    header = text_rows[0]
    if len(header) < 3 or header[0] != "sample_id" or header[1] != "label":
        raise FormatError(
            f"{path}: header must be 'sample_id,label,f0,...', got {header[:3]}"
        )
    ids: list[str] = []
    labels: list[str | None] = []
    values: list[list[float]] = []
    for lineno, record in enumerate(text_rows[1:], start=2):
        if len(record) != len(header):
            raise FormatError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(record)}"
            )
        ids.append(record[0])
        labels.append(record[1] or None)
        try:
            values.append([float(v) for v in record[2:]])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric feature: {exc}") from exc
    matrix = np.asarray(values, dtype=np.float64) if values else np.zeros((0, len(header) - 2))
    return tuple(ids), tuple(labels), matrix


def _read_csv_rows(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as handle:
        return [row for row in csv.reader(handle)]
