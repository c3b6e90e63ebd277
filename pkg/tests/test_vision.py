import numpy as np
import pytest

from forgetext import (
    GrayImage,
    PixelSet,
    RgbImage,
    canny,
    dct_band_ratio,
    dilate,
    erode,
    glcm_contrast,
    laplacian_variance,
    rgb_to_lab,
    sobel_magnitude,
    ssim,
    to_grayscale,
)
from forgetext.errors import DimensionMismatch, EmptyRegion, NoPairs
from forgetext.vision import compute_glcm, dct2, read_gray_png, read_rgb_png, write_gray_png, write_rgb_png

import oracles


def full_frame(h, w):
    return PixelSet(np.ones((h, w), bool))


def random_gray(rng, h=16, w=16):
    return GrayImage(rng.uniform(0, 255, (h, w)))


# ---------------------------------------------------------------------------
# grayscale / lab


def test_grayscale_white_and_black():
    white = RgbImage(np.full((3, 3, 3), 255, np.uint8))
    assert np.allclose(to_grayscale(white).data, 255.0)
    black = RgbImage(np.zeros((1, 1, 3), np.uint8))
    assert to_grayscale(black).data[0, 0] == 0.0


def test_grayscale_pure_red():
    arr = np.zeros((2, 2, 3), np.uint8)
    arr[:, :, 0] = 255
    gray = to_grayscale(RgbImage(arr))
    assert np.allclose(gray.data, 0.299 * 255)


def test_lab_white_black():
    white = rgb_to_lab(RgbImage(np.full((1, 1, 3), 255, np.uint8)))
    assert np.allclose(white.data[0, 0], [255.0, 128.0, 128.0], atol=0.5)
    black = rgb_to_lab(RgbImage(np.zeros((1, 1, 3), np.uint8)))
    assert np.allclose(black.data[0, 0], [0.0, 128.0, 128.0], atol=0.5)


def _lab_ref(r, g, b):
    # textbook sRGB(D65) -> CIELAB, evaluated pointwise
    def lin(c):
        c = c / 255.0
        return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4

    rl, gl, bl = lin(r), lin(g), lin(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl

    def f(t):
        return t ** (1 / 3) if t > (6 / 29) ** 3 else t / (3 * (6 / 29) ** 2) + 4 / 29

    fx, fy, fz = f(x / 0.95047), f(y / 1.0), f(z / 1.08883)
    lab = (116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz))
    return (
        min(max(lab[0] * 255 / 100, 0), 255),
        min(max(lab[1] + 128, 0), 255),
        min(max(lab[2] + 128, 0), 255),
    )


def test_lab_against_reference_formula():
    rng = np.random.default_rng(11)
    samples = [(255, 0, 0)] + [tuple(rng.integers(0, 256, 3)) for _ in range(40)]
    for r, g, b in samples:
        img = RgbImage(np.array([[[r, g, b]]], np.uint8))
        got = rgb_to_lab(img).data[0, 0]
        want = _lab_ref(int(r), int(g), int(b))
        assert np.allclose(got, want, atol=1.0)


def test_lab_gray_inputs_have_neutral_chroma():
    for v in (0, 7, 63, 128, 200, 255):
        img = RgbImage(np.full((2, 2, 3), v, np.uint8))
        lab = rgb_to_lab(img)
        assert abs(lab.data[0, 0, 1] - 128.0) <= 1.0
        assert abs(lab.data[0, 0, 2] - 128.0) <= 1.0


# ---------------------------------------------------------------------------
# laplacian variance


def test_laplacian_variance_constant_zero():
    img = GrayImage(np.full((10, 10), 42.0))
    assert laplacian_variance(img, full_frame(10, 10)) == 0.0


def test_laplacian_variance_single_pixel_region():
    rng = np.random.default_rng(0)
    img = random_gray(rng, 8, 8)
    region = np.zeros((8, 8), bool)
    region[3, 3] = True
    assert laplacian_variance(img, PixelSet(region)) == 0.0


def test_laplacian_variance_checkerboard_matches_oracle():
    board = GrayImage((np.indices((8, 8)).sum(0) % 2) * 255.0)
    interior = np.zeros((8, 8), bool)
    interior[1:-1, 1:-1] = True
    got = laplacian_variance(board, PixelSet(interior))
    want = oracles.laplacian_variance_ref(board.data, interior)
    assert got == pytest.approx(want, rel=1e-12)


def test_laplacian_variance_shift_invariant():
    rng = np.random.default_rng(5)
    img = random_gray(rng)
    region = full_frame(16, 16)
    v1 = laplacian_variance(img, region)
    v2 = laplacian_variance(GrayImage(img.data + 37.0), region)
    assert v1 == pytest.approx(v2, abs=1e-9)


def test_laplacian_variance_empty_region():
    img = GrayImage(np.zeros((4, 4)))
    with pytest.raises(EmptyRegion):
        laplacian_variance(img, PixelSet(np.zeros((4, 4), bool)))


# ---------------------------------------------------------------------------
# ssim


def test_ssim_self_is_one():
    rng = np.random.default_rng(1)
    img = random_gray(rng)
    assert ssim(img, img, full_frame(16, 16)) == 1.0


def test_ssim_constant_pair_hand_value():
    a = GrayImage(np.full((8, 8), 100.0))
    b = GrayImage(np.full((8, 8), 50.0))
    expected = (2 * 100 * 50 + 6.5025) / (100**2 + 50**2 + 6.5025)
    assert ssim(a, b, full_frame(8, 8)) == pytest.approx(expected, abs=1e-12)


def test_ssim_random_pair_matches_oracle():
    rng = np.random.default_rng(2)
    a = random_gray(rng, 32, 32)
    b = random_gray(rng, 32, 32)
    got = ssim(a, b, full_frame(32, 32))
    want = oracles.ssim_ref(a.data, b.data, np.ones((32, 32), bool))
    assert got == pytest.approx(want, abs=1e-9)


def test_ssim_small_region_fallback():
    rng = np.random.default_rng(3)
    a = random_gray(rng, 12, 12)
    b = random_gray(rng, 12, 12)
    region = np.zeros((12, 12), bool)
    region[2:6, 3:8] = True  # 4x5 bounding box, below the 8x8 window
    got = ssim(a, b, PixelSet(region))
    want = oracles.ssim_ref(a.data, b.data, region)
    assert got == pytest.approx(want, abs=1e-12)


def test_ssim_dimension_mismatch():
    a = GrayImage(np.zeros((4, 4)))
    b = GrayImage(np.zeros((5, 4)))
    with pytest.raises(DimensionMismatch):
        ssim(a, b, full_frame(4, 4))


# ---------------------------------------------------------------------------
# glcm


def test_glcm_constant_zero_contrast():
    img = GrayImage(np.full((6, 6), 9.0))
    assert glcm_contrast(img, full_frame(6, 6)) == 0.0


def test_glcm_two_pixel_identical():
    img = GrayImage(np.array([[10.0, 10.0]]))
    assert glcm_contrast(img, full_frame(1, 2)) == 0.0


def test_glcm_stripes_match_enumeration():
    stripes = GrayImage(np.tile(np.array([0.0, 255.0] * 4), (8, 1)))
    got = glcm_contrast(stripes, full_frame(8, 8))
    want = oracles.glcm_contrast_ref(stripes.data, np.ones((8, 8), bool))
    assert got == pytest.approx(want, rel=1e-12)
    # horizontal pairs carry half the mass, vertical pairs are all equal
    assert got == pytest.approx(0.5 * 255**2 / 65536, rel=1e-12)


def test_glcm_matrix_normalized():
    rng = np.random.default_rng(4)
    img = random_gray(rng, 9, 9)
    glcm = compute_glcm(img, full_frame(9, 9))
    assert glcm.matrix.sum() == pytest.approx(1.0, abs=1e-12)


def test_glcm_no_pairs():
    img = GrayImage(np.zeros((5, 5)))
    region = np.zeros((5, 5), bool)
    region[0, 0] = True
    region[3, 3] = True  # two isolated pixels: no adjacent pair
    with pytest.raises(NoPairs):
        glcm_contrast(img, PixelSet(region))


# ---------------------------------------------------------------------------
# sobel


def test_sobel_constant_zero():
    img = GrayImage(np.full((9, 9), 77.0))
    assert np.all(sobel_magnitude(img).data == 0.0)


def test_sobel_vertical_step_edge():
    img = np.zeros((8, 8))
    img[:, 4:] = 255.0
    mag = sobel_magnitude(GrayImage(img))
    assert mag.data[4, 3] == pytest.approx(1020.0)
    assert mag.data[4, 4] == pytest.approx(1020.0)
    # away from the edge the response vanishes
    assert mag.data[4, 1] == pytest.approx(0.0)


def test_sobel_horizontal_step_edge_symmetric():
    img = np.zeros((8, 8))
    img[4:, :] = 255.0
    mag = sobel_magnitude(GrayImage(img))
    assert mag.data[3, 4] == pytest.approx(1020.0)
    got = sobel_magnitude(GrayImage(img))
    want = oracles.sobel_magnitude_ref(img)
    assert np.allclose(got.data, want, atol=1e-9)


# ---------------------------------------------------------------------------
# canny


def test_canny_constant_empty():
    img = GrayImage(np.full((16, 16), 13.0))
    assert canny(img, 50, 150).is_empty()


def test_canny_infinite_thresholds_empty():
    rng = np.random.default_rng(6)
    img = random_gray(rng)
    assert canny(img, np.inf, np.inf).is_empty()


def test_canny_square_contour():
    img = np.zeros((48, 48))
    img[12:36, 12:36] = 255.0
    edges = canny(GrayImage(img), 50, 150)
    perimeter = 4 * 24
    assert abs(edges.count() - perimeter) <= 0.2 * perimeter
    # the contour hugs the square boundary: all edge pixels within 3 px of it
    ys, xs = np.nonzero(edges.data)
    dist_to_box = np.maximum(
        np.maximum(12 - ys, ys - 35), np.maximum(12 - xs, xs - 35)
    )
    assert np.all(np.abs(dist_to_box) <= 3)


# ---------------------------------------------------------------------------
# dct band ratio


def test_dct_constant_region_zero():
    img = GrayImage(np.full((8, 8), 100.0))
    assert dct_band_ratio(img, full_frame(8, 8)) == 0.0


def test_dct_checkerboard_high_ratio_matches_oracle():
    board = GrayImage((np.indices((8, 8)).sum(0) % 2) * 255.0)
    got = dct_band_ratio(board, full_frame(8, 8))
    want = oracles.dct_band_ratio_ref(board.data, np.ones((8, 8), bool))
    assert got > 1.0
    assert got == pytest.approx(want, rel=1e-9)


def test_dct_scale_invariance():
    rng = np.random.default_rng(7)
    img = random_gray(rng)
    region = full_frame(16, 16)
    r1 = dct_band_ratio(img, region)
    r2 = dct_band_ratio(GrayImage(img.data * 3.7), region)
    assert r1 == pytest.approx(r2, abs=1e-9)


def test_dct2_matches_double_sum():
    rng = np.random.default_rng(8)
    x = rng.uniform(-50, 50, (8, 8))
    assert np.allclose(dct2(x), oracles.dct2_ref(x), atol=1e-9)


# ---------------------------------------------------------------------------
# morphology


def test_dilate_empty_stays_empty():
    empty = PixelSet(np.zeros((10, 10), bool))
    assert dilate(empty, 3).is_empty()


def test_dilate_zero_radius_identity():
    rng = np.random.default_rng(9)
    mask = PixelSet(rng.random((10, 10)) > 0.5)
    assert np.array_equal(dilate(mask, 0).data, mask.data)


def test_erode_full_frame_border():
    full = full_frame(12, 12)
    for k in (1, 2, 3):
        eroded = erode(full, k)
        want = np.zeros((12, 12), bool)
        want[k:-k, k:-k] = True
        assert np.array_equal(eroded.data, want)


def test_closing_contains_convex_set():
    mask = np.zeros((14, 14), bool)
    mask[4:9, 5:11] = True
    closed = erode(dilate(PixelSet(mask), 1), 1)
    assert np.all(closed.data[mask])


def test_morphology_matches_reference():
    rng = np.random.default_rng(10)
    mask = rng.random((12, 12)) > 0.6
    assert np.array_equal(dilate(PixelSet(mask), 2).data, oracles.dilate_ref(mask, 2))
    assert np.array_equal(erode(PixelSet(mask), 2).data, oracles.erode_ref(mask, 2))


# ---------------------------------------------------------------------------
# determinism and io


def test_kernels_bit_for_bit_deterministic():
    rng = np.random.default_rng(12)
    img = random_gray(rng)
    region = full_frame(16, 16)
    assert laplacian_variance(img, region) == laplacian_variance(img, region)
    assert glcm_contrast(img, region) == glcm_contrast(img, region)
    assert dct_band_ratio(img, region) == dct_band_ratio(img, region)
    assert np.array_equal(sobel_magnitude(img).data, sobel_magnitude(img).data)


def test_png_roundtrip_rgb(tmp_path):
    rng = np.random.default_rng(13)
    img = RgbImage(rng.integers(0, 256, (15, 11, 3), np.uint8))
    path = tmp_path / "img.png"
    write_rgb_png(img, path)
    back = read_rgb_png(path)
    assert np.array_equal(back.data, img.data)


def test_png_gray_rounds_and_clamps(tmp_path):
    img = GrayImage(np.array([[0.4, 0.6], [255.0, 254.5]]))
    path = tmp_path / "g.png"
    write_gray_png(img, path)
    back = read_gray_png(path)
    assert np.array_equal(back.data, np.array([[0.0, 1.0], [255.0, 255.0]]))


def test_rgbimage_validates_shape():
    with pytest.raises(ValueError):
        RgbImage(np.zeros((4, 4), np.uint8))
    with pytest.raises(ValueError):
        GrayImage(np.array([[np.nan]]))
