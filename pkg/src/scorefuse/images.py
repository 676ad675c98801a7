"""Grayscale raster handling: loading, square resizing, flips/rotations, augmentation.

Conventions, since the source material leaves them open:

* rotation is counter-clockwise in steps of 90 degrees;
* ``stretch`` resizing uses bilinear interpolation with half-pixel centers
  (identity when sizes match; a 1-pixel source samples at its center);
* ``pad`` resizing preserves aspect ratio, centers the content, and fills
  the dead space with a constant intensity;
* a constant image min-max normalizes to all zeros rather than dividing by
  zero.

Augmentation is a training-data concern only; the CLI enforces that, the
functions here are partition-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EmptyImageError, IoError, UnsupportedFormatError, ValidationError

ROTATIONS = (0, 90, 180, 270)
FLIPS = ("horizontal", "vertical")


@dataclass(frozen=True, eq=False)
class RasterImage:
    """H x W grid of intensities in [0, 1], row-major."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"raster must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise EmptyImageError("raster has zero pixels")
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("intensities must lie in [0, 1]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def load_image(path: str | Path) -> RasterImage:
    """Load an 8-bit grayscale/RGB PNG or a P5 PGM, scaled to [0, 1].

    RGB collapses to grayscale as the plain average of the three channels.
    """
    path = Path(path)
    try:
        head = path.open("rb").read(2)
    except OSError as exc:
        raise IoError(f"cannot read image {path}: {exc}") from exc
    if head == b"P5":
        return _load_pgm(path)
    if head == b"\x89P":
        return _load_png(path)
    raise UnsupportedFormatError(f"{path}: expected PNG or P5 PGM, got magic {head!r}")


def _load_png(path: Path) -> RasterImage:
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode == "L":
                arr = np.asarray(img, dtype=np.float64)
            elif mode == "RGB":
                arr = np.asarray(img, dtype=np.float64).mean(axis=2)
            else:
                raise UnsupportedFormatError(
                    f"{path}: PNG mode {mode!r} unsupported (need 8-bit L or RGB)"
                )
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"{path}: not a decodable PNG: {exc}") from exc
    except OSError as exc:
        raise IoError(f"{path}: failed to decode PNG: {exc}") from exc
    return RasterImage(arr / 255.0)


def _load_pgm(path: Path) -> RasterImage:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read image {path}: {exc}") from exc
    try:
        tokens, offset = _pgm_header_tokens(blob)
        width, height, maxval = (int(t) for t in tokens[1:4])
    except (ValueError, IndexError) as exc:
        raise IoError(f"{path}: malformed PGM header: {exc}") from exc
    if width < 1 or height < 1:
        raise IoError(f"{path}: bad PGM dimensions {width}x{height}")
    if maxval <= 0 or maxval > 255:
        raise UnsupportedFormatError(f"{path}: PGM maxval {maxval} unsupported (8-bit only)")
    data = blob[offset : offset + width * height]
    if len(data) < width * height:
        raise IoError(f"{path}: truncated PGM data ({len(data)} of {width * height} bytes)")
    arr = np.frombuffer(data, dtype=np.uint8).astype(np.float64).reshape(height, width)
    return RasterImage(arr / float(maxval))


def _pgm_header_tokens(blob: bytes) -> tuple[list[bytes], int]:
    """Parse 'P5 <w> <h> <maxval>' allowing comments; returns tokens and data offset."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        if i >= len(blob):
            raise ValueError("header ended early")
        c = blob[i : i + 1]
        if c == b"#":
            while i < len(blob) and blob[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(blob) and not blob[j : j + 1].isspace():
                j += 1
            tokens.append(blob[i:j])
            i = j
    if tokens[0] != b"P5":
        raise ValueError(f"not a P5 file: {tokens[0]!r}")
    return tokens, i + 1  # single whitespace byte separates header from data


def save_pgm(img: RasterImage, path: str | Path) -> None:
    from .io import atomic_write

    data = np.rint(img.pixels * 255.0).astype(np.uint8)
    try:
        with atomic_write(path, "wb") as handle:
            handle.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
            handle.write(data.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write PGM {path}: {exc}") from exc


def _resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers, clamped at the borders."""
    in_h, in_w = pixels.shape

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        low = np.floor(src).astype(np.int64)
        high = np.minimum(low + 1, n_in - 1)
        frac = src - low
        return low, high, frac

    y0, y1, fy = axis_coords(in_h, out_h)
    x0, x1, fx = axis_coords(in_w, out_w)
    top = pixels[y0][:, x0] * (1 - fx) + pixels[y0][:, x1] * fx
    bottom = pixels[y1][:, x0] * (1 - fx) + pixels[y1][:, x1] * fx
    return top * (1 - fy)[:, None] + bottom * fy[:, None]


def resize_square(
    img: RasterImage,
    side: int,
    mode: str = "pad",
    fill: float = 0.0,
) -> RasterImage:
    """Resize to side x side, either stretching or padding to preserve aspect.

    ``pad`` scales the longer edge to ``side``, keeps the aspect ratio,
    centers the result, and fills the leftover bands with ``fill``.
    """
    if side < 1:
        raise ValidationError(f"target side must be >= 1, got {side}")
    if mode == "stretch":
        return RasterImage(_resize_bilinear(img.pixels, side, side))
    if mode != "pad":
        raise ValidationError(f"unknown resize mode {mode!r}")
    if not 0.0 <= fill <= 1.0:
        raise ValidationError(f"fill intensity {fill} outside [0, 1]")
    scale = side / max(img.height, img.width)
    new_h = max(1, round(img.height * scale))
    new_w = max(1, round(img.width * scale))
    content = _resize_bilinear(img.pixels, new_h, new_w)
    canvas = np.full((side, side), float(fill))
    top = (side - new_h) // 2
    left = (side - new_w) // 2
    canvas[top : top + new_h, left : left + new_w] = content
    return RasterImage(canvas)


def rotate90(img: RasterImage, k: int) -> RasterImage:
    """Rotate counter-clockwise by k quarter turns; dimensions swap for odd k."""
    return RasterImage(np.rot90(img.pixels, k % 4))


def flip(img: RasterImage, axis: str) -> RasterImage:
    """Mirror left-right (``horizontal``) or top-bottom (``vertical``)."""
    if axis == "horizontal":
        return RasterImage(np.fliplr(img.pixels))
    if axis == "vertical":
        return RasterImage(np.flipud(img.pixels))
    raise ValidationError(f"unknown flip axis {axis!r}")


def min_max_normalize(img: RasterImage) -> RasterImage:
    """Stretch intensities to span [0, 1]; a constant image maps to all zeros."""
    lo = img.pixels.min()
    hi = img.pixels.max()
    if hi == lo:
        return RasterImage(np.zeros_like(img.pixels))
    return RasterImage((img.pixels - lo) / (hi - lo))


@dataclass(frozen=True)
class AugmentPlan:
    """Which rotations and flips to emit per training image.

    The identity copy (rotation 0) is always retained. ``seed`` is carried
    for any future randomized selection policy; the plan itself is
    deterministic.
    """

    rotations: tuple[int, ...] = (0,)
    flips: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        for r in self.rotations:
            if r not in ROTATIONS:
                raise ValidationError(f"rotation {r} not one of {ROTATIONS}")
        if 0 not in self.rotations:
            raise ValidationError("plan must retain the identity copy (rotation 0)")
        if len(set(self.rotations)) != len(self.rotations):
            raise ValidationError("duplicate rotations in plan")
        for f in self.flips:
            if f not in FLIPS:
                raise ValidationError(f"flip {f!r} not one of {FLIPS}")
        if len(set(self.flips)) != len(self.flips):
            raise ValidationError("duplicate flips in plan")


def _plan_variants(plan: AugmentPlan) -> list[tuple[int, str | None]]:
    variants = []
    for rotation in sorted(plan.rotations):
        variants.append((rotation, None))
        if "horizontal" in plan.flips:
            variants.append((rotation, "horizontal"))
        if "vertical" in plan.flips:
            variants.append((rotation, "vertical"))
    return variants


def augment(img: RasterImage, plan: AugmentPlan) -> list[RasterImage]:
    """Deterministic augmentation set: each rotation, then its flips; identity first."""
    out = []
    for rotation, flip_axis in _plan_variants(plan):
        variant = rotate90(img, rotation // 90)
        if flip_axis is not None:
            variant = flip(variant, flip_axis)
        out.append(variant)
    return out


def augment_ids(sample_id: str, plan: AugmentPlan) -> list[str]:
    """Derived sample ids aligned 1:1 with :func:`augment` output order."""
    suffix = {None: "", "horizontal": "#fliph", "vertical": "#flipv"}
    return [
        f"{sample_id}#rot90x{rotation // 90}{suffix[flip_axis]}"
        for rotation, flip_axis in _plan_variants(plan)
    ]
