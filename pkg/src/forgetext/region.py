"""Forgery masks, landmark-driven facial partitions, and region extraction."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import (
    DegenerateHull,
    DimensionMismatch,
    EmptyList,
    EmptyRegionMap,
)
from .vision import PixelSet, RgbImage, dilate, same_frame

REGION_NAMES = ("mouth", "nose", "eyes", "face")

# 68-point landmark index ranges (DLIB convention)
MOUTH_POINTS = slice(48, 68)
NOSE_POINTS = slice(27, 36)
RIGHT_EYE_POINTS = slice(36, 42)
LEFT_EYE_POINTS = slice(42, 48)
EYE_DILATION_PX = 4


@dataclass(frozen=True)
class ForgeryMask:
    """Per-pixel manipulation intensity in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected (h, w) array, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("mask cannot be empty")
        if np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
            raise ValueError("mask values must lie in [0, 1]")
        out = arr.copy(order="C")
        out.setflags(write=False)
        object.__setattr__(self, "values", out)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def binarize(self, level: float) -> PixelSet:
        """Pixels strictly above ``level``."""
        return PixelSet(self.values > level)

    def write_png(self, path):
        quantized = np.clip(np.floor(self.values * 255.0 + 0.5), 0, 255).astype(np.uint8)
        Image.fromarray(quantized, mode="L").save(path, format="PNG")


@dataclass(frozen=True)
class Landmarks:
    """Exactly 68 (x, y) points, clamped into the frame they describe."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.points, dtype=np.float64)
        if arr.shape != (68, 2):
            raise ValueError(f"expected 68 (x, y) points, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("landmark coordinates must be finite")
        out = arr.copy(order="C")
        out.setflags(write=False)
        object.__setattr__(self, "points", out)

    def clamped(self, width: int, height: int) -> "Landmarks":
        pts = self.points.copy()
        pts[:, 0] = np.clip(pts[:, 0], 0, width - 1)
        pts[:, 1] = np.clip(pts[:, 1], 0, height - 1)
        return Landmarks(pts)

    @classmethod
    def from_json(cls, path) -> "Landmarks":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(np.asarray(payload["points"], dtype=np.float64))


@dataclass(frozen=True)
class RegionMap:
    """The four pairwise-disjoint facial areas on one frame."""

    regions: dict[str, PixelSet] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.regions) != set(REGION_NAMES):
            raise ValueError(f"region map must contain exactly {REGION_NAMES}")
        shapes = {ps.data.shape for ps in self.regions.values()}
        if len(shapes) != 1:
            raise DimensionMismatch("region pixel sets are on different frames")

    @property
    def width(self) -> int:
        return self.regions["face"].width

    @property
    def height(self) -> int:
        return self.regions["face"].height

    def __getitem__(self, name: str) -> PixelSet:
        return self.regions[name]


@dataclass(frozen=True)
class ForgeryRegionList:
    """Regions whose mean mask value exceeded the threshold, sorted descending."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        means = [m for _, m in self.entries]
        if means != sorted(means, reverse=True):
            raise ValueError("entries must be sorted by descending mean")
        object.__setattr__(self, "entries", tuple(self.entries))

    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def is_empty(self) -> bool:
        return not self.entries


def generate_mask(real: RgbImage, fake: RgbImage) -> ForgeryMask:
    """Channel-mean absolute difference, normalized to [0, 1]."""
    same_frame(real, fake)
    diff = np.abs(real.data.astype(np.float64) - fake.data.astype(np.float64))
    return ForgeryMask(diff.mean(axis=2) / 255.0)


# ---------------------------------------------------------------------------
# Convex-hull rasterization


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull; vertices in counter-clockwise order."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] < 3:
        raise DegenerateHull("fewer than 3 distinct points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1], dtype=np.float64)
    if hull.shape[0] < 3:
        raise DegenerateHull("all points are collinear")
    return hull


def fill_hull(points: np.ndarray, width: int, height: int) -> PixelSet:
    """Pixels whose integer centers lie inside (or on) the convex hull of ``points``."""
    hull = _convex_hull(np.asarray(points, dtype=np.float64))
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    inside = np.ones((height, width), dtype=bool)
    n = hull.shape[0]
    for k in range(n):
        px, py = hull[k]
        qx, qy = hull[(k + 1) % n]
        # hull is CCW, so inside points have nonnegative cross products
        cross = (qx - px) * (gy - py) - (qy - py) * (gx - px)
        inside &= cross >= -1e-9
    return PixelSet(inside)


def partition_regions(lms: Landmarks, width: int, height: int) -> RegionMap:
    """Partition the frame into mouth, nose, eyes and face from 68 landmarks.

    Eyes are the union of the two eye hulls each dilated by 4 px; face is the
    hull of all 68 points minus the other three. Overlaps are resolved with
    priority mouth > nose > eyes so the four sets come out disjoint.
    """
    pts = lms.clamped(width, height).points
    mouth = fill_hull(pts[MOUTH_POINTS], width, height)
    nose = fill_hull(pts[NOSE_POINTS], width, height)
    eye_right = dilate(fill_hull(pts[RIGHT_EYE_POINTS], width, height), EYE_DILATION_PX)
    eye_left = dilate(fill_hull(pts[LEFT_EYE_POINTS], width, height), EYE_DILATION_PX)
    hull_all = fill_hull(pts, width, height)

    nose = nose - mouth
    eyes = (eye_right | eye_left) - mouth - nose
    face = hull_all - mouth - nose - eyes
    return RegionMap({"mouth": mouth, "nose": nose, "eyes": eyes, "face": face})


def extract_forgery_regions(
    mask: ForgeryMask, region_map: RegionMap, threshold: float
) -> ForgeryRegionList:
    """Regions whose mean mask value strictly exceeds ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if (mask.height, mask.width) != (region_map.height, region_map.width):
        raise DimensionMismatch("mask and region map are on different frames")
    candidates = []
    for order, name in enumerate(REGION_NAMES):
        pixels = region_map[name]
        if pixels.is_empty():
            raise EmptyRegionMap(f"region {name!r} has zero pixels")
        mean = float(mask.values[pixels.data].mean())
        if mean > threshold:
            candidates.append((name, mean, order))
    candidates.sort(key=lambda e: (-e[1], e[2]))
    return ForgeryRegionList(tuple((name, mean) for name, mean, _ in candidates))


def select_region(region_list: ForgeryRegionList, seed: int) -> str:
    """Uniform seeded choice over the list entries; same seed, same choice."""
    if region_list.is_empty():
        raise EmptyList("cannot select from an empty forgery region list")
    rng = random.Random(seed)
    return region_list.entries[rng.randrange(len(region_list.entries))][0]
