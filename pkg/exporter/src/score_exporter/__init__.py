"""score_exporter: torchvision backbones -> score-table CSVs.

A bridge between pretrained deep image classifiers and the fusion engine:
it reads a dataset manifest, runs one backbone (DenseNet, ResNet,
EfficientNet, VGG-16, or ViT) over every listed image, and writes softmax
probabilities in the score-table CSV format the engine ingests.
"""

from .backbones import BACKBONES, BackboneLoadError, build_backbone
from .export import ExportJob, export_scores
from .formats import ManifestError, ManifestRow, read_manifest, write_score_table

__version__ = "0.1.0"
