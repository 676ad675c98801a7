import numpy as np
import pytest
from PIL import Image

from scorefuse.errors import (
    EmptyImageError,
    IoError,
    UnsupportedFormatError,
    ValidationError,
)
from scorefuse.images import (
    AugmentPlan,
    RasterImage,
    augment,
    augment_ids,
    flip,
    load_image,
    min_max_normalize,
    resize_square,
    rotate90,
    save_pgm,
)


def bilinear_at(pixels, y, x):
    """Independent single-point bilinear evaluator (clamped, half-pixel frame)."""
    h, w = pixels.shape
    y = min(max(y, 0.0), h - 1.0)
    x = min(max(x, 0.0), w - 1.0)
    y0, x0 = int(np.floor(y)), int(np.floor(x))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    fy, fx = y - y0, x - x0
    top = pixels[y0, x0] * (1 - fx) + pixels[y0, x1] * fx
    bot = pixels[y1, x0] * (1 - fx) + pixels[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def brute_force_resize(pixels, out_h, out_w):
    h, w = pixels.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            sy = (i + 0.5) * h / out_h - 0.5
            sx = (j + 0.5) * w / out_w - 0.5
            out[i, j] = bilinear_at(pixels, sy, sx)
    return out


class TestLoadImage:
    def test_pgm_endpoints(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0]))
        img = load_image(path)
        np.testing.assert_array_equal(img.pixels, [[0.0, 1.0], [1.0, 0.0]])

    def test_all_zero_image(self, tmp_path):
        path = tmp_path / "z.pgm"
        path.write_bytes(b"P5\n3 2\n255\n" + bytes(6))
        assert load_image(path).pixels.max() == 0.0

    def test_truncated_pgm(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(IoError):
            load_image(path)

    def test_png_gray_round_trip(self, tmp_path):
        data = np.arange(16, dtype=np.uint8).reshape(4, 4) * 17
        path = tmp_path / "g.png"
        Image.fromarray(data, mode="L").save(path)
        img = load_image(path)
        np.testing.assert_allclose(img.pixels, data / 255.0)

    def test_png_rgb_collapses_by_channel_average(self, tmp_path):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 0] = 30
        rgb[..., 1] = 60
        rgb[..., 2] = 90
        path = tmp_path / "c.png"
        Image.fromarray(rgb, mode="RGB").save(path)
        img = load_image(path)
        np.testing.assert_allclose(img.pixels, np.full((2, 2), 60 / 255.0))

    def test_unknown_magic(self, tmp_path):
        path = tmp_path / "t.xyz"
        path.write_bytes(b"GIF89a....")
        with pytest.raises(UnsupportedFormatError):
            load_image(path)

    def test_pgm_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        img = RasterImage(rng.integers(0, 256, size=(7, 9)) / 255.0)
        path = tmp_path / "rt.pgm"
        save_pgm(img, path)
        np.testing.assert_allclose(load_image(path).pixels, img.pixels)


class TestResizeSquare:
    def test_identity_both_modes(self):
        rng = np.random.default_rng(1)
        img = RasterImage(rng.uniform(size=(10, 10)))
        for mode in ("pad", "stretch"):
            np.testing.assert_allclose(resize_square(img, 10, mode).pixels, img.pixels)

    def test_pad_centers_wide_image_with_bands(self):
        img = RasterImage(np.full((50, 100), 0.5))
        out = resize_square(img, 100, mode="pad", fill=0.0)
        assert out.pixels.shape == (100, 100)
        assert (out.pixels[:25] == 0.0).all()
        assert (out.pixels[75:] == 0.0).all()
        assert (out.pixels[25:75] == 0.5).all()

    def test_stretch_row_to_square(self):
        img = RasterImage(np.array([[0.0, 0.5, 1.0]]))
        out = resize_square(img, 3, mode="stretch")
        for row in out.pixels:
            np.testing.assert_allclose(row, [0.0, 0.5, 1.0])

    def test_stretch_matches_brute_force_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            h, w = rng.integers(1, 12, size=2)
            side = int(rng.integers(1, 15))
            pixels = rng.uniform(size=(h, w))
            got = resize_square(RasterImage(pixels), side, mode="stretch").pixels
            np.testing.assert_allclose(got, brute_force_resize(pixels, side, side), atol=1e-12)

    def test_output_always_square(self):
        rng = np.random.default_rng(2)
        for _ in range(12):
            h, w = rng.integers(1, 30, size=2)
            side = int(rng.integers(1, 40))
            img = RasterImage(rng.uniform(size=(h, w)))
            for mode in ("pad", "stretch"):
                assert resize_square(img, side, mode).pixels.shape == (side, side)

    def test_rejects_bad_side(self):
        img = RasterImage(np.zeros((2, 2)))
        with pytest.raises(ValidationError):
            resize_square(img, 0)

    def test_empty_image_unconstructible(self):
        with pytest.raises(EmptyImageError):
            RasterImage(np.zeros((0, 3)))


class TestRotateFlip:
    def test_rotate_identity(self):
        rng = np.random.default_rng(3)
        img = RasterImage(rng.uniform(size=(4, 6)))
        np.testing.assert_array_equal(rotate90(img, 0).pixels, img.pixels)
        np.testing.assert_array_equal(rotate90(img, 4).pixels, img.pixels)

    def test_rotate_column_ccw(self):
        # Hand oracle for the 2-pixel map: CCW sends the top of a column
        # to the left of a row.
        img = RasterImage(np.array([[0.25], [0.75]]))
        out = rotate90(img, 1)
        np.testing.assert_array_equal(out.pixels, np.array([[0.25, 0.75]]))

    def test_rotate_full_index_map_oracle(self):
        rng = np.random.default_rng(8)
        pixels = rng.uniform(size=(3, 5))
        out = rotate90(RasterImage(pixels), 1).pixels
        h, w = pixels.shape
        for i in range(w):
            for j in range(h):
                assert out[i, j] == pixels[j, w - 1 - i]

    def test_rotation_inverse_pairs(self):
        rng = np.random.default_rng(4)
        img = RasterImage(rng.uniform(size=(5, 7)))
        for k in range(5):
            back = rotate90(rotate90(img, k), 4 - k)
            np.testing.assert_array_equal(back.pixels, img.pixels)

    def test_flip_row(self):
        img = RasterImage(np.array([[0.0, 0.5, 1.0]]))
        np.testing.assert_array_equal(flip(img, "horizontal").pixels, [[1.0, 0.5, 0.0]])

    def test_flip_involution(self):
        rng = np.random.default_rng(5)
        img = RasterImage(rng.uniform(size=(6, 4)))
        for axis in ("horizontal", "vertical"):
            np.testing.assert_array_equal(flip(flip(img, axis), axis).pixels, img.pixels)

    def test_flip_h_then_v_is_rotate180(self):
        rng = np.random.default_rng(6)
        img = RasterImage(rng.uniform(size=(5, 5)))
        both = flip(flip(img, "vertical"), "horizontal")
        np.testing.assert_array_equal(both.pixels, rotate90(img, 2).pixels)

    def test_symmetric_image_fixed_by_flip(self):
        img = RasterImage(np.array([[0.1, 0.2, 0.1], [0.3, 0.4, 0.3]]))
        np.testing.assert_array_equal(flip(img, "horizontal").pixels, img.pixels)


class TestMinMaxNormalize:
    def test_linear_stretch(self):
        img = RasterImage(np.array([[0.2, 0.6, 1.0]]))
        np.testing.assert_allclose(min_max_normalize(img).pixels, [[0.0, 0.5, 1.0]])

    def test_constant_maps_to_zero(self):
        img = RasterImage(np.full((3, 3), 0.7))
        assert (min_max_normalize(img).pixels == 0.0).all()

    def test_full_span_unchanged(self):
        img = RasterImage(np.array([[0.0, 0.25], [0.75, 1.0]]))
        np.testing.assert_allclose(min_max_normalize(img).pixels, img.pixels)

    def test_spans_unit_interval_for_nonconstant(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            img = RasterImage(rng.uniform(0.2, 0.8, size=(4, 4)))
            out = min_max_normalize(img).pixels
            assert out.min() == 0.0 and out.max() == 1.0


class TestAugment:
    def test_identity_only_plan(self):
        rng = np.random.default_rng(1)
        img = RasterImage(rng.uniform(size=(3, 3)))
        out = augment(img, AugmentPlan())
        assert len(out) == 1
        np.testing.assert_array_equal(out[0].pixels, img.pixels)

    def test_full_rotations_with_horizontal_flip_gives_eight(self):
        rng = np.random.default_rng(2)
        img = RasterImage(rng.uniform(size=(4, 4)))
        plan = AugmentPlan((0, 90, 180, 270), ("horizontal",))
        out = augment(img, plan)
        assert len(out) == 8
        np.testing.assert_array_equal(out[0].pixels, img.pixels)  # identity first
        ids = augment_ids("s1", plan)
        assert ids == [
            "s1#rot90x0", "s1#rot90x0#fliph",
            "s1#rot90x1", "s1#rot90x1#fliph",
            "s1#rot90x2", "s1#rot90x2#fliph",
            "s1#rot90x3", "s1#rot90x3#fliph",
        ]

    def test_fully_symmetric_image_gives_equal_outputs(self):
        img = RasterImage(np.full((5, 5), 0.3))
        out = augment(img, AugmentPlan((0, 90, 180, 270), ("horizontal", "vertical")))
        for variant in out:
            np.testing.assert_array_equal(variant.pixels, img.pixels)

    def test_plan_must_keep_identity(self):
        with pytest.raises(ValidationError):
            AugmentPlan((90,))
