"""Image containers and the handwritten kernels the detectors consume.

Everything here is pure and deterministic: no global state, replicate
padding at frame borders, population statistics throughout. Containers are
frozen dataclasses over read-only numpy buffers, so they are safe to share
across worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, EmptyRegion, NoPairs

# ITU-R BT.601 luma weights
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

# sRGB (linear) -> XYZ, D65 white point
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])

_LAPLACIAN_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DYNAMIC_RANGE = 255.0

GLCM_LEVELS = 256
# right, down, left, up
_GLCM_OFFSETS = ((0, 1), (1, 0), (0, -1), (-1, 0))


def _lock(arr: np.ndarray) -> np.ndarray:
    # copy so freezing never reaches back into a caller-owned buffer
    out = arr.copy(order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RgbImage:
    """8-bit RGB raster, row-major (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        object.__setattr__(self, "data", _lock(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class GrayImage:
    """Real-valued single-plane raster, natural range [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected (h, w) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("gray values must be finite")
        object.__setattr__(self, "data", _lock(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class LabImage:
    """CIELAB raster under the 8-bit-scaled convention.

    L is stored as L*255/100, a and b as a+128 / b+128, each clamped to
    [0, 255]. The detector thresholds were tuned under this scaling.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {arr.shape}")
        object.__setattr__(self, "data", _lock(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class PixelSet:
    """Boolean pixel membership carrying its frame dimensions."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"expected (h, w) boolean array, got shape {arr.shape}")
        object.__setattr__(self, "data", _lock(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def count(self) -> int:
        return int(self.data.sum())

    def is_empty(self) -> bool:
        return not bool(self.data.any())

    def bounding_box(self) -> tuple[int, int, int, int]:
        """(y0, x0, y1, x1) half-open box around the member pixels."""
        ys, xs = np.nonzero(self.data)
        if ys.size == 0:
            raise EmptyRegion("bounding box of an empty pixel set")
        return int(ys.min()), int(xs.min()), int(ys.max()) + 1, int(xs.max()) + 1

    def _check_frame(self, other: "PixelSet"):
        if self.data.shape != other.data.shape:
            raise DimensionMismatch(
                f"pixel sets on different frames: {self.data.shape} vs {other.data.shape}"
            )

    def __or__(self, other: "PixelSet") -> "PixelSet":
        self._check_frame(other)
        return PixelSet(self.data | other.data)

    def __and__(self, other: "PixelSet") -> "PixelSet":
        self._check_frame(other)
        return PixelSet(self.data & other.data)

    def __sub__(self, other: "PixelSet") -> "PixelSet":
        self._check_frame(other)
        return PixelSet(self.data & ~other.data)


@dataclass(frozen=True)
class Glcm:
    """Normalized gray-level co-occurrence matrix averaged over four directions."""

    matrix: np.ndarray
    levels: int = GLCM_LEVELS

    def __post_init__(self):
        arr = np.asarray(self.matrix, dtype=np.float64)
        if arr.shape != (self.levels, self.levels):
            raise ValueError(f"expected {self.levels}x{self.levels} matrix")
        if np.any(arr < 0):
            raise ValueError("co-occurrence entries must be nonnegative")
        object.__setattr__(self, "matrix", _lock(arr))


def same_frame(a, b):
    """Raise DimensionMismatch unless the two rasters share width and height."""
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatch(
            f"frames differ: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


# ---------------------------------------------------------------------------
# Color


def to_grayscale(img: RgbImage) -> GrayImage:
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B."""
    rgb = img.data.astype(np.float64)
    gray = rgb[:, :, 0] * GRAY_WEIGHTS[0] + rgb[:, :, 1] * GRAY_WEIGHTS[1] + rgb[:, :, 2] * GRAY_WEIGHTS[2]
    return GrayImage(gray)


def rgb_to_lab(img: RgbImage) -> LabImage:
    """sRGB (D65) to CIELAB, scaled into 8-bit range per channel."""
    srgb = img.data.astype(np.float64) / 255.0
    linear = np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3.0 * delta**2) + 4.0 / 29.0)
    l_star = 116.0 * f[:, :, 1] - 16.0
    a_star = 500.0 * (f[:, :, 0] - f[:, :, 1])
    b_star = 200.0 * (f[:, :, 1] - f[:, :, 2])
    scaled = np.stack([l_star * 255.0 / 100.0, a_star + 128.0, b_star + 128.0], axis=2)
    return LabImage(np.clip(scaled, 0.0, 255.0))


# ---------------------------------------------------------------------------
# Filtering


def _convolve_replicate(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Dense 2-D correlation with replicate (edge) padding."""
    kh, kw = kernel.shape
    py, px = kh // 2, kw // 2
    padded = np.pad(plane, ((py, py), (px, px)), mode="edge")
    h, w = plane.shape
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            weight = kernel[i, j]
            if weight != 0.0:
                out += weight * padded[i : i + h, j : j + w]
    return out


def laplacian_response(img: GrayImage) -> GrayImage:
    """4-neighbor Laplacian [[0,1,0],[1,-4,1],[0,1,0]] with replicate padding."""
    return GrayImage(_convolve_replicate(img.data, _LAPLACIAN_KERNEL))


def laplacian_variance(img: GrayImage, region: PixelSet) -> float:
    """Population variance of the Laplacian response over the region pixels."""
    same_frame(img, region)
    if region.is_empty():
        raise EmptyRegion("laplacian variance over an empty region")
    response = _convolve_replicate(img.data, _LAPLACIAN_KERNEL)
    values = response[region.data]
    return float(values.var())


def sobel_gradients(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    gx = _convolve_replicate(img.data, _SOBEL_X)
    gy = _convolve_replicate(img.data, _SOBEL_Y)
    return gx, gy


def sobel_magnitude(img: GrayImage) -> GrayImage:
    """Per-pixel gradient magnitude sqrt(gx^2 + gy^2) from 3x3 Sobel kernels."""
    gx, gy = sobel_gradients(img)
    return GrayImage(np.hypot(gx, gy))


# ---------------------------------------------------------------------------
# Similarity


def _ssim_value(mu_a, mu_b, var_a, var_b, cov, c1, c2):
    return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )


def ssim(a: GrayImage, b: GrayImage, region: PixelSet) -> float:
    """Mean local SSIM over 8x8 uniform windows inside the region's bounding box.

    Falls back to a single global SSIM over the region pixels when the
    bounding box is smaller than the window. Constants follow K1=0.01,
    K2=0.03 with dynamic range 255.
    """
    same_frame(a, b)
    same_frame(a, region)
    if region.is_empty():
        raise EmptyRegion("ssim over an empty region")

    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2
    y0, x0, y1, x1 = region.bounding_box()
    crop_a = a.data[y0:y1, x0:x1]
    crop_b = b.data[y0:y1, x0:x1]

    if crop_a.shape[0] < SSIM_WINDOW or crop_a.shape[1] < SSIM_WINDOW:
        inside = region.data[y0:y1, x0:x1]
        va = crop_a[inside]
        vb = crop_b[inside]
        mu_a, mu_b = va.mean(), vb.mean()
        return float(
            _ssim_value(
                mu_a,
                mu_b,
                va.var(),
                vb.var(),
                ((va - mu_a) * (vb - mu_b)).mean(),
                c1,
                c2,
            )
        )

    win_a = np.lib.stride_tricks.sliding_window_view(crop_a, (SSIM_WINDOW, SSIM_WINDOW))
    win_b = np.lib.stride_tricks.sliding_window_view(crop_b, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = win_a.mean(axis=(2, 3))
    mu_b = win_b.mean(axis=(2, 3))
    var_a = (win_a**2).mean(axis=(2, 3)) - mu_a**2
    var_b = (win_b**2).mean(axis=(2, 3)) - mu_b**2
    cov = (win_a * win_b).mean(axis=(2, 3)) - mu_a * mu_b
    return float(_ssim_value(mu_a, mu_b, var_a, var_b, cov, c1, c2).mean())


# ---------------------------------------------------------------------------
# Texture

_glcm_weights_cache: np.ndarray | None = None


def _glcm_contrast_weights() -> np.ndarray:
    global _glcm_weights_cache
    if _glcm_weights_cache is None:
        idx = np.arange(GLCM_LEVELS, dtype=np.float64)
        _glcm_weights_cache = np.subtract.outer(idx, idx) ** 2
    return _glcm_weights_cache


def compute_glcm(img: GrayImage, region: PixelSet) -> Glcm:
    """Distance-1 co-occurrence counts over right/down/left/up, averaged and normalized.

    Only pairs with both pixels inside the region are counted; intensities
    are quantized to integer levels 0..255 with round-half-up.
    """
    same_frame(img, region)
    if region.is_empty():
        raise EmptyRegion("glcm over an empty region")
    q = np.clip(np.floor(img.data + 0.5), 0, GLCM_LEVELS - 1).astype(np.int64)
    member = region.data
    h, w = q.shape
    counts = np.zeros(GLCM_LEVELS * GLCM_LEVELS, dtype=np.float64)
    for dy, dx in _GLCM_OFFSETS:
        src_y = slice(max(0, -dy), min(h, h - dy))
        src_x = slice(max(0, -dx), min(w, w - dx))
        dst_y = slice(max(0, dy), min(h, h + dy))
        dst_x = slice(max(0, dx), min(w, w + dx))
        valid = member[src_y, src_x] & member[dst_y, dst_x]
        if not valid.any():
            continue
        i = q[src_y, src_x][valid]
        j = q[dst_y, dst_x][valid]
        counts += np.bincount(i * GLCM_LEVELS + j, minlength=GLCM_LEVELS * GLCM_LEVELS)
    total = counts.sum()
    if total == 0:
        raise NoPairs("no co-occurring in-region pixel pair in any direction")
    return Glcm(counts.reshape(GLCM_LEVELS, GLCM_LEVELS) / total)


def glcm_contrast(img: GrayImage, region: PixelSet) -> float:
    """Contrast (1/65536) * sum |i - j|^2 P(i, j) of the averaged GLCM."""
    glcm = compute_glcm(img, region)
    n = GLCM_LEVELS * GLCM_LEVELS
    return float((_glcm_contrast_weights() * glcm.matrix).sum() / n)


# ---------------------------------------------------------------------------
# Edges


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def canny(img: GrayImage, low: float, high: float, sigma: float = 1.4) -> PixelSet:
    """Gaussian 5x5 smoothing, Sobel, 4-sector non-maximum suppression, hysteresis."""
    if not (0 <= low <= high):
        raise ValueError("need 0 <= low <= high")
    smoothed = _convolve_replicate(img.data, _gaussian_kernel(5, sigma))
    gx = _convolve_replicate(smoothed, _SOBEL_X)
    gy = _convolve_replicate(smoothed, _SOBEL_Y)
    mag = np.hypot(gx, gy)

    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant")  # out-of-frame neighbors count as 0
    center = padded[1:-1, 1:-1]

    def shifted(dy, dx):
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    sector0 = (angle < 22.5) | (angle >= 157.5)
    sector45 = (angle >= 22.5) & (angle < 67.5)
    sector90 = (angle >= 67.5) & (angle < 112.5)
    sector135 = (angle >= 112.5) & (angle < 157.5)

    keep = np.zeros_like(mag, dtype=bool)
    keep |= sector0 & (center >= shifted(0, 1)) & (center >= shifted(0, -1))
    keep |= sector45 & (center >= shifted(-1, 1)) & (center >= shifted(1, -1))
    keep |= sector90 & (center >= shifted(1, 0)) & (center >= shifted(-1, 0))
    keep |= sector135 & (center >= shifted(-1, -1)) & (center >= shifted(1, 1))
    nms = np.where(keep, mag, 0.0)

    strong = nms >= high
    weak = nms >= low
    edges = strong.copy()
    while True:
        grown = np.zeros_like(edges)
        grown[1:, :] |= edges[:-1, :]
        grown[:-1, :] |= edges[1:, :]
        grown[:, 1:] |= edges[:, :-1]
        grown[:, :-1] |= edges[:, 1:]
        grown[1:, 1:] |= edges[:-1, :-1]
        grown[1:, :-1] |= edges[:-1, 1:]
        grown[:-1, 1:] |= edges[1:, :-1]
        grown[:-1, :-1] |= edges[1:, 1:]
        added = grown & weak & ~edges
        if not added.any():
            break
        edges |= added
    return PixelSet(edges)


# ---------------------------------------------------------------------------
# Frequency


def _dct_basis(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis matrix: row u, column x."""
    x = np.arange(n, dtype=np.float64)
    u = x[:, None]
    basis = np.cos(math.pi * (2.0 * x[None, :] + 1.0) * u / (2.0 * n))
    basis *= math.sqrt(2.0 / n)
    basis[0, :] = math.sqrt(1.0 / n)
    return basis


def dct2(plane: np.ndarray) -> np.ndarray:
    """2-D orthonormal DCT-II."""
    plane = np.asarray(plane, dtype=np.float64)
    return _dct_basis(plane.shape[0]) @ plane @ _dct_basis(plane.shape[1]).T


def dct_band_ratio(img: GrayImage, region: PixelSet, band_fraction: float = 0.25) -> float:
    """High-to-low frequency energy ratio of the region's bounding-box spectrum.

    Pixels outside the region are zeroed, the crop is DCT-II transformed, and
    coefficients split at index radius min(bw, bh) * band_fraction with the DC
    term excluded from both bands.
    """
    same_frame(img, region)
    if region.is_empty():
        raise EmptyRegion("dct band ratio over an empty region")
    y0, x0, y1, x1 = region.bounding_box()
    crop = np.where(region.data[y0:y1, x0:x1], img.data[y0:y1, x0:x1], 0.0)
    coeffs = dct2(crop)
    bh, bw = crop.shape
    uu, vv = np.meshgrid(np.arange(bh), np.arange(bw), indexing="ij")
    radius = np.sqrt(uu.astype(np.float64) ** 2 + vv.astype(np.float64) ** 2)
    cutoff = min(bw, bh) * band_fraction
    dc = (uu == 0) & (vv == 0)
    low = (radius < cutoff) & ~dc
    high = (radius >= cutoff) & ~dc
    magnitudes = np.abs(coeffs)
    # flat content leaves ~1e-13-relative cosine-sum residue in every band;
    # clip below machine noise so constant regions score exactly 0
    floor = 1e-10 * magnitudes.max()
    magnitudes = np.where(magnitudes > floor, magnitudes, 0.0)
    return float(magnitudes[high].sum() / max(magnitudes[low].sum(), 1e-12))


# ---------------------------------------------------------------------------
# Morphology (3x3 cross structuring element, iterated radius times)


def _dilate_once(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def _erode_once(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    # pixels outside the frame count as background
    out[1:, :] &= mask[:-1, :]
    out[:-1, :] &= mask[1:, :]
    out[:, 1:] &= mask[:, :-1]
    out[:, :-1] &= mask[:, 1:]
    out[0, :] = False
    out[-1, :] = False
    out[:, 0] = False
    out[:, -1] = False
    return out


def dilate(mask: PixelSet, radius: int) -> PixelSet:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    data = mask.data
    for _ in range(radius):
        data = _dilate_once(data)
    return PixelSet(data)


def erode(mask: PixelSet, radius: int) -> PixelSet:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    data = mask.data
    for _ in range(radius):
        data = _erode_once(data)
    return PixelSet(data)


# ---------------------------------------------------------------------------
# PNG IO


def read_rgb_png(path) -> RgbImage:
    with Image.open(path) as im:
        return RgbImage(np.asarray(im.convert("RGB")))


def write_rgb_png(img: RgbImage, path):
    Image.fromarray(img.data, mode="RGB").save(path, format="PNG")


def read_gray_png(path) -> GrayImage:
    with Image.open(path) as im:
        return GrayImage(np.asarray(im.convert("L"), dtype=np.float64))


def write_gray_png(img: GrayImage, path):
    quantized = np.clip(np.floor(img.data + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(quantized, mode="L").save(path, format="PNG")
