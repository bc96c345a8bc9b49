import numpy as np
import pytest

from prunedoc.errors import MalformedInputError
from prunedoc.imagegrid import (
    GrayImage,
    all_patch_pixels,
    extract_grid,
    load_image,
    load_pgm,
    pad_to_multiple,
    patch_at,
    save_pgm,
    save_png,
    to_grayscale,
)


def solid_rgb(r, g, b, h=2, w=2):
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    arr[:, :] = (r, g, b)
    return arr


class TestToGrayscale:
    def test_white_fixed_point(self):
        assert to_grayscale(solid_rgb(255, 255, 255)).data[0, 0] == 255

    def test_black_fixed_point(self):
        assert to_grayscale(solid_rgb(0, 0, 0)).data[0, 0] == 0

    def test_pure_red(self):
        # round(0.299 * 255) = round(76.245) = 76
        assert to_grayscale(solid_rgb(255, 0, 0)).data[0, 0] == 76

    def test_luma_matches_scalar_formula(self):
        rng = np.random.default_rng(0)
        rgb = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
        out = to_grayscale(rgb)
        for y in range(5):
            for x in range(7):
                r, g, b = (int(v) for v in rgb[y, x])
                expected = int(np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5))
                assert out.data[y, x] == expected

    def test_malformed_shape_rejected(self):
        with pytest.raises(MalformedInputError):
            to_grayscale(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(MalformedInputError):
            to_grayscale(np.zeros((4, 4, 4), dtype=np.uint8))


class TestPadToMultiple:
    def test_aligned_image_unchanged(self):
        img = GrayImage(np.zeros((28, 28), dtype=np.uint8))
        assert pad_to_multiple(img, 28) is img

    def test_pad_right_with_white(self):
        img = GrayImage(np.zeros((28, 29), dtype=np.uint8))
        out = pad_to_multiple(img, 28)
        assert (out.width, out.height) == (56, 28)
        assert (out.data[:, :29] == 0).all()
        assert (out.data[:, 29:] == 255).all()

    def test_ceil_arithmetic(self):
        img = GrayImage(np.zeros((60, 100), dtype=np.uint8))
        out = pad_to_multiple(img, 28)
        assert (out.width, out.height) == (112, 84)

    def test_idempotent(self):
        img = GrayImage(np.random.default_rng(1).integers(0, 256, (30, 41), dtype=np.uint8))
        once = pad_to_multiple(img, 28)
        assert pad_to_multiple(once, 28) == once

    def test_bad_patch_size(self):
        with pytest.raises(MalformedInputError):
            pad_to_multiple(GrayImage(np.zeros((4, 4), dtype=np.uint8)), 0)


class TestExtractGrid:
    def test_aligned_grid(self):
        img = GrayImage(np.zeros((56, 56), dtype=np.uint8))
        g = extract_grid(img, 28)
        assert (g.rows, g.cols) == (2, 2)
        assert sorted(patch_at(g, r, c).index for r in range(2) for c in range(2)) == [0, 1, 2, 3]

    def test_a4_at_300dpi(self):
        img = GrayImage(np.full((3507, 2481), 255, dtype=np.uint8))
        g = extract_grid(img, 28)
        assert (g.rows, g.cols) == (126, 89)
        assert (g.source.width, g.source.height) == (2492, 3528)

    def test_degenerate_one_pixel(self):
        img = GrayImage(np.array([[7]], dtype=np.uint8))
        g = extract_grid(img, 28)
        assert (g.rows, g.cols) == (1, 1)
        p = patch_at(g, 0, 0)
        assert p.pixels[0, 0] == 7
        assert (p.pixels.reshape(-1)[1:] == 255).all()


class TestPatchAt:
    def test_origin_index_zero(self):
        g = extract_grid(GrayImage(np.zeros((8, 8), dtype=np.uint8)), 4)
        assert patch_at(g, 0, 0).index == 0

    def test_raster_index(self):
        g = extract_grid(GrayImage(np.zeros((8, 8), dtype=np.uint8)), 4)
        assert patch_at(g, 1, 0).index == 2

    def test_wide_grid_index(self):
        g = extract_grid(GrayImage(np.zeros((16, 40), dtype=np.uint8)), 4)
        assert g.cols == 10
        assert patch_at(g, 3, 5).index == 35

    def test_out_of_range(self):
        g = extract_grid(GrayImage(np.zeros((8, 8), dtype=np.uint8)), 4)
        with pytest.raises(IndexError):
            patch_at(g, 2, 0)


def test_index_bijection_and_reassembly():
    rng = np.random.default_rng(3)
    img = GrayImage(rng.integers(0, 256, (37, 53), dtype=np.uint8))
    g = extract_grid(img, 8)
    indices = [patch_at(g, r, c).index for r in range(g.rows) for c in range(g.cols)]
    assert sorted(indices) == list(range(g.rows * g.cols))

    flat = all_patch_pixels(g)
    rebuilt = (
        flat.reshape(g.rows, g.cols, 8, 8)
        .transpose(0, 2, 1, 3)
        .reshape(g.source.height, g.source.width)
    )
    assert np.array_equal(rebuilt, g.source.data)


def test_pgm_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(4)
    img = GrayImage(rng.integers(0, 256, (11, 17), dtype=np.uint8))
    path = tmp_path / "golden.pgm"
    save_pgm(img, path)
    assert load_pgm(path) == img
    save_pgm(load_pgm(path), tmp_path / "again.pgm")
    assert (tmp_path / "again.pgm").read_bytes() == path.read_bytes()


def test_png_load_matches_luma(tmp_path):
    from PIL import Image

    rng = np.random.default_rng(5)
    rgb = rng.integers(0, 256, (9, 13, 3), dtype=np.uint8)
    path = tmp_path / "color.png"
    Image.fromarray(rgb, mode="RGB").save(path)
    assert load_image(path) == to_grayscale(rgb)


def test_gray_png_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    img = GrayImage(rng.integers(0, 256, (9, 13), dtype=np.uint8))
    path = tmp_path / "gray.png"
    save_png(img, path)
    assert load_image(path) == img
