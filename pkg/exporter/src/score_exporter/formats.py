"""The CSV boundary contract, restated locally.

The exporter deliberately does not import the fusion engine; the two sides
share only these on-disk formats:

* manifest CSV: header ``sample_id,path,label``, paths relative to the
  manifest's directory;
* score-table CSV: header ``sample_id,true_label,<class_1>,...,<class_K>``
  with class columns in label-space order, probabilities at 12 significant
  digits, UTF-8, LF line endings.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class ManifestError(ValueError):
    """Manifest is missing, malformed, or inconsistent with the label space."""


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    path: str
    label: str


def read_manifest(path: str | Path, classes: Sequence[str]) -> list[ManifestRow]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            records = list(csv.reader(handle))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if not records or records[0] != ["sample_id", "path", "label"]:
        raise ManifestError(f"{path}: header must be 'sample_id,path,label'")
    rows = []
    seen: set[str] = set()
    for lineno, record in enumerate(records[1:], start=2):
        if len(record) != 3:
            raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(record)}")
        sample_id, rel_path, label = record
        if sample_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate sample_id {sample_id!r}")
        seen.add(sample_id)
        if not rel_path:
            raise ManifestError(f"{path}:{lineno}: empty path")
        if label not in classes:
            raise ManifestError(f"{path}:{lineno}: label {label!r} not in {list(classes)}")
        rows.append(ManifestRow(sample_id, rel_path, label))
    return rows


def write_score_table(
    path: str | Path,
    classes: Sequence[str],
    sample_ids: Sequence[str],
    labels: Sequence[str],
    probabilities: np.ndarray,
) -> None:
    """Atomic write of a score table; row order follows the inputs."""
    path = Path(path)
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.shape != (len(sample_ids), len(classes)):
        raise ValueError(f"probability matrix shape {probs.shape} does not fit")
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["sample_id", "true_label", *classes])
            for i, sid in enumerate(sample_ids):
                writer.writerow([sid, labels[i], *(f"{p:.12g}" for p in probs[i])])
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
