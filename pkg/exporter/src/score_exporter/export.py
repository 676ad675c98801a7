"""Batch inference over a manifest, emitting a score-table CSV."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import transforms

from .backbones import BACKBONES, BackboneLoadError, build_backbone
from .formats import ManifestError, read_manifest, write_score_table

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ExportJob:
    manifest: str
    backbone: str
    classes: tuple[str, ...]
    out: str
    device: str = "cpu"
    weights: str = "pretrained"
    batch_size: int = 8
    image_size: int = 224
    seed: int = 0

    def __post_init__(self) -> None:
        if self.backbone not in BACKBONES:
            raise BackboneLoadError(
                f"unknown backbone {self.backbone!r}; expected one of {BACKBONES}"
            )
        if not self.classes or len(set(self.classes)) != len(self.classes):
            raise ManifestError(f"classes must be non-empty and unique, got {self.classes}")
        if Path(self.out).resolve() == Path(self.manifest).resolve():
            raise ManifestError("output path must differ from the manifest path")
        if self.batch_size < 1:
            raise ManifestError(f"batch_size must be >= 1, got {self.batch_size}")


def _loader(image_size: int):
    return transforms.Compose(
        [
            transforms.Resize((image_size, image_size)),
            transforms.ToTensor(),
            transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
        ]
    )


def export_scores(job: ExportJob) -> None:
    """One row per manifest sample, in manifest order; softmax over classes.

    Inference runs in eval mode under no_grad, so repeated exports of the
    same manifest are deterministic.
    """
    rows = read_manifest(job.manifest, job.classes)
    model = build_backbone(job.backbone, len(job.classes), job.weights, job.seed)
    device = torch.device(job.device)
    model.to(device)

    root = Path(job.manifest).parent
    prep = _loader(job.image_size)
    tensors = []
    for row in rows:
        image_path = root / row.path
        try:
            with Image.open(image_path) as img:
                tensors.append(prep(img.convert("RGB")))
        except (OSError, ValueError) as exc:
            raise ManifestError(f"cannot load image {image_path}: {exc}") from exc

    probs = np.zeros((len(rows), len(job.classes)))
    with torch.no_grad():
        for start in range(0, len(tensors), job.batch_size):
            batch = torch.stack(tensors[start : start + job.batch_size]).to(device)
            logits = model(batch)
            probs[start : start + batch.shape[0]] = (
                torch.softmax(logits.double(), dim=1).cpu().numpy()
            )

    write_score_table(
        job.out,
        job.classes,
        [r.sample_id for r in rows],
        [r.label for r in rows],
        probs,
    )
