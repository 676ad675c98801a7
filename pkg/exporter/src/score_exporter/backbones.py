"""Backbone registry: construct a torchvision model with a K-class head.

``weights="pretrained"`` pulls the default torchvision checkpoint (needs
either a local cache or network access); ``weights="none"`` builds a
seeded, randomly initialized network, which still produces structurally
valid score tables for pipeline plumbing and smoke tests.
"""

from __future__ import annotations

import torch
from torch import nn

BACKBONES = ("densenet", "resnet", "efficientnet", "vgg16", "vit")


class BackboneLoadError(RuntimeError):
    """The requested backbone or its weights could not be materialized."""


def _build(name: str, pretrained: bool):
    from torchvision import models

    if name == "densenet":
        model = models.densenet121(
            weights=models.DenseNet121_Weights.DEFAULT if pretrained else None
        )
        return model, ("classifier",)
    if name == "resnet":
        model = models.resnet50(
            weights=models.ResNet50_Weights.DEFAULT if pretrained else None
        )
        return model, ("fc",)
    if name == "efficientnet":
        model = models.efficientnet_b0(
            weights=models.EfficientNet_B0_Weights.DEFAULT if pretrained else None
        )
        return model, ("classifier", 1)
    if name == "vgg16":
        model = models.vgg16(weights=models.VGG16_Weights.DEFAULT if pretrained else None)
        return model, ("classifier", 6)
    if name == "vit":
        model = models.vit_b_16(
            weights=models.ViT_B_16_Weights.DEFAULT if pretrained else None
        )
        return model, ("heads", "head")
    raise BackboneLoadError(f"unknown backbone {name!r}; expected one of {BACKBONES}")


def _get_attr(obj, spec):
    for key in spec:
        obj = obj[key] if isinstance(key, int) else getattr(obj, key)
    return obj


def _set_attr(obj, spec, value):
    parent = _get_attr(obj, spec[:-1])
    key = spec[-1]
    if isinstance(key, int):
        parent[key] = value
    else:
        setattr(parent, key, value)


def build_backbone(name: str, n_classes: int, weights: str = "pretrained", seed: int = 0):
    """Return an eval-mode model mapping (N,3,H,W) images to n_classes logits."""
    if name not in BACKBONES:
        raise BackboneLoadError(f"unknown backbone {name!r}; expected one of {BACKBONES}")
    if weights not in ("pretrained", "none"):
        raise BackboneLoadError(f"weights must be 'pretrained' or 'none', got {weights!r}")
    torch.manual_seed(seed)
    try:
        model, head_spec = _build(name, pretrained=weights == "pretrained")
    except BackboneLoadError:
        raise
    except Exception as exc:  # checkpoint download/deserialization failures
        raise BackboneLoadError(f"cannot load backbone {name!r}: {exc}") from exc
    old_head = _get_attr(model, head_spec)
    _set_attr(model, head_spec, nn.Linear(old_head.in_features, n_classes))
    model.eval()
    return model
