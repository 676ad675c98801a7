"""Walk through the image pipeline: load, square-resize, normalize, augment.

Builds a handful of synthetic grayscale "scans", then shows both resize
strategies side by side and the deterministic augmentation fan-out that is
applied to training data only.

Run:  python demos/01_preprocess_and_augment.py
"""

import tempfile
from pathlib import Path

import numpy as np

from scorefuse import (
    AugmentPlan,
    RasterImage,
    augment,
    augment_ids,
    load_image,
    min_max_normalize,
    resize_square,
    save_pgm,
)

out_dir = Path(tempfile.mkdtemp(prefix="scorefuse_demo_"))
rng = np.random.default_rng(0)

# A fake 60x90 "scan": a bright blob on a dim background, low contrast.
yy, xx = np.mgrid[0:60, 0:90]
blob = np.exp(-(((yy - 30) / 12.0) ** 2 + ((xx - 55) / 18.0) ** 2))
scan = 0.3 + 0.25 * blob + 0.05 * rng.uniform(size=(60, 90))
img = RasterImage(np.clip(scan, 0.0, 1.0))
save_pgm(img, out_dir / "scan.pgm")
img = load_image(out_dir / "scan.pgm")
print(f"loaded scan: {img.height}x{img.width}, intensities in "
      f"[{img.pixels.min():.3f}, {img.pixels.max():.3f}]")

normalized = min_max_normalize(img)
print(f"after min-max normalization: [{normalized.pixels.min():.1f}, "
      f"{normalized.pixels.max():.1f}]")

# Two ways to make it square: distort, or preserve aspect and pad.
stretched = resize_square(normalized, 224, mode="stretch")
padded = resize_square(normalized, 224, mode="pad", fill=0.0)
print(f"stretch -> {stretched.height}x{stretched.width} (content distorted)")
band = int((224 - round(60 * 224 / 90)) // 2)
print(f"pad     -> {padded.height}x{padded.width} (aspect kept, ~{band}px bands)")

# The training-set augmentation fan-out: four quarter turns, each with its
# horizontal mirror. Test data must never pass through this.
plan = AugmentPlan(rotations=(0, 90, 180, 270), flips=("horizontal",))
variants = augment(padded, plan)
names = augment_ids("scan", plan)
print(f"\naugmentation plan gives {len(variants)} variants:")
for name, variant in zip(names, variants):
    save_pgm(variant, out_dir / f"{name.replace('#', '_')}.pgm")
    print(f"  {name:<24} {variant.height}x{variant.width}")

print(f"\nwrote results to {out_dir}")
