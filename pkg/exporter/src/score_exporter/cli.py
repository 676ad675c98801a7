"""Command-line entry point.

Exit codes: 0 success, 2 manifest/validation failure, 4 backbone load
failure.
"""

from __future__ import annotations

import argparse
import sys

from .backbones import BACKBONES, BackboneLoadError
from .export import ExportJob, export_scores
from .formats import ManifestError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="score-exporter",
        description="Run a pretrained image backbone over a manifest and emit a score-table CSV.",
    )
    parser.add_argument("--manifest", required=True, help="manifest CSV (sample_id,path,label)")
    parser.add_argument("--backbone", required=True, choices=BACKBONES)
    parser.add_argument("--classes", required=True,
                        help="ordered class names, comma-separated (defines column order)")
    parser.add_argument("--out", required=True, help="output score-table CSV")
    parser.add_argument("--device", default="cpu", help="torch device hint (default cpu)")
    parser.add_argument("--weights", choices=("pretrained", "none"), default="pretrained",
                        help="'none' builds a seeded randomly initialized backbone")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--image-size", type=int, default=224)
    parser.add_argument("--seed", type=int, default=0, help="head (and, for --weights none, backbone) init seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    classes = tuple(name for name in args.classes.split(",") if name)
    try:
        job = ExportJob(
            manifest=args.manifest,
            backbone=args.backbone,
            classes=classes,
            out=args.out,
            device=args.device,
            weights=args.weights,
            batch_size=args.batch_size,
            image_size=args.image_size,
            seed=args.seed,
        )
        export_scores(job)
    except BackboneLoadError as exc:
        print(f"score-exporter: E_BACKBONE: {exc}", file=sys.stderr)
        return 4
    except (ManifestError, ValueError, OSError) as exc:
        print(f"score-exporter: E_DATA: {exc}", file=sys.stderr)
        return 2
    print(f"exported {args.backbone} scores -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
