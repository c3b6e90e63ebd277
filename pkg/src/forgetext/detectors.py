"""The five forgery-type deciders, each returning a boolean plus raw evidence.

All triggers use strict inequalities and population statistics, so a
reported decision can always be recomputed from the reported metrics and
the thresholds that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBoundary, EmptyRegion, ForgetextError
from .region import ForgeryMask
from .vision import (
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
    same_frame,
    sobel_magnitude,
    ssim,
    to_grayscale,
)

COLOR_DIFFERENCE = "ColorDifference"
BLUR = "Blur"
STRUCTURE_ABNORMAL = "StructureAbnormal"
TEXTURE_ABNORMAL = "TextureAbnormal"
BLEND_BOUNDARY = "BlendBoundary"

FORGERY_TYPES = (COLOR_DIFFERENCE, BLUR, STRUCTURE_ABNORMAL, TEXTURE_ABNORMAL, BLEND_BOUNDARY)

BOUNDARY_BAND_PX = 5


@dataclass(frozen=True)
class DetectorThresholds:
    """Decision thresholds for the five deciders.

    The blend-boundary trio and the Canny pair have no published values;
    the defaults here separate a constant frame (all false) from a hard
    paste (true) and are exposed through the pipeline config.
    """

    color_mean: float = 1.0
    color_std: float = 0.5
    blur_variance: float = 100.0
    ssim: float = 0.97
    texture_contrast: float = 0.7
    blend_gradient: float = 15.0
    blend_edge: float = 0.10
    blend_frequency: float = 0.5
    canny_low: float = 50.0
    canny_high: float = 150.0

    def __post_init__(self):
        for name in (
            "color_mean",
            "color_std",
            "blur_variance",
            "texture_contrast",
            "blend_gradient",
            "blend_edge",
            "blend_frequency",
            "canny_low",
            "canny_high",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 < self.ssim <= 1.0:
            raise ValueError("ssim threshold must lie in (0, 1]")


@dataclass(frozen=True)
class TypeEvidence:
    """One decider's verdict with the numbers behind it."""

    forgery_type: str
    triggered: bool
    metrics: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "forgery_type": self.forgery_type,
            "triggered": self.triggered,
            "metrics": dict(self.metrics),
            "error": self.error,
        }


def lab_stat_distance(lab_real, lab_fake, region: PixelSet) -> tuple[float, float]:
    """Channel-averaged |mean| and |std| distances between two Lab rasters."""
    member = region.data
    mean_terms = []
    std_terms = []
    for c in range(3):
        vr = lab_real.data[:, :, c][member]
        vf = lab_fake.data[:, :, c][member]
        mean_terms.append(abs(float(vr.mean()) - float(vf.mean())))
        std_terms.append(abs(float(vr.std()) - float(vf.std())))
    return sum(mean_terms) / 3.0, sum(std_terms) / 3.0


def detect_color_difference(
    real: RgbImage, fake: RgbImage, region: PixelSet, th: DetectorThresholds
) -> TypeEvidence:
    """Lab-space mean/std distance between the paired regions."""
    same_frame(real, fake)
    same_frame(real, region)
    if region.is_empty():
        raise EmptyRegion("color difference over an empty region")
    mean_dist, std_dist = lab_stat_distance(rgb_to_lab(real), rgb_to_lab(fake), region)
    triggered = mean_dist > th.color_mean and std_dist > th.color_std
    return TypeEvidence(
        COLOR_DIFFERENCE, triggered, {"mean_dist": mean_dist, "std_dist": std_dist}
    )


def detect_blur(
    real_gray: GrayImage, fake_gray: GrayImage, region: PixelSet, th: DetectorThresholds
) -> TypeEvidence:
    """Real sharper than fake by more than the Laplacian-variance threshold."""
    r_var = laplacian_variance(real_gray, region)
    f_var = laplacian_variance(fake_gray, region)
    triggered = r_var > f_var and (r_var - f_var) > th.blur_variance
    return TypeEvidence(BLUR, triggered, {"real_variance": r_var, "fake_variance": f_var})


def detect_structure_abnormal(
    real_gray: GrayImage, fake_gray: GrayImage, region: PixelSet, th: DetectorThresholds
) -> TypeEvidence:
    """SSIM between the paired regions below the threshold."""
    s = ssim(real_gray, fake_gray, region)
    return TypeEvidence(STRUCTURE_ABNORMAL, s < th.ssim, {"ssim": s})


def detect_texture_abnormal(
    real_gray: GrayImage, fake_gray: GrayImage, region: PixelSet, th: DetectorThresholds
) -> TypeEvidence:
    """Real GLCM contrast above the fake's by more than the threshold."""
    c_real = glcm_contrast(real_gray, region)
    c_fake = glcm_contrast(fake_gray, region)
    triggered = c_real > c_fake and (c_real - c_fake) > th.texture_contrast
    return TypeEvidence(
        TEXTURE_ABNORMAL, triggered, {"real_contrast": c_real, "fake_contrast": c_fake}
    )


def detect_blend_boundary(
    image: GrayImage,
    mask: PixelSet,
    th: DetectorThresholds,
    band_px: int = BOUNDARY_BAND_PX,
    dct_band_fraction: float = 0.25,
) -> TypeEvidence:
    """Gradient, edge, and frequency votes over the mask's boundary band.

    Triggers when at least two of the three statistics exceed their
    thresholds. Per-metric hits are reported as 0/1 metrics so the phrasing
    stage can name the evidence without re-deriving it.
    """
    same_frame(image, mask)
    if mask.is_empty():
        raise EmptyRegion("blend boundary needs a nonempty mask")
    inner = mask - erode(mask, band_px)
    outer = dilate(mask, band_px) - mask
    if inner.is_empty() or outer.is_empty():
        raise EmptyBoundary("inner or outer boundary band is empty")
    band = inner | outer

    grad = sobel_magnitude(image).data
    gradient_gap = abs(float(grad[inner.data].mean()) - float(grad[outer.data].mean()))
    edges = canny(image, th.canny_low, th.canny_high)
    edge_density = float((edges.data & band.data).sum()) / float(band.count())
    # center on the band mean first: otherwise the masked band's own outline
    # dominates the spectrum and flat content would not score zero
    centered = GrayImage(image.data - float(image.data[band.data].mean()))
    frequency_ratio = dct_band_ratio(centered, band, band_fraction=dct_band_fraction)

    hits = {
        "gradient_hit": 1.0 if gradient_gap > th.blend_gradient else 0.0,
        "edge_hit": 1.0 if edge_density > th.blend_edge else 0.0,
        "frequency_hit": 1.0 if frequency_ratio > th.blend_frequency else 0.0,
    }
    evidence_count = sum(hits.values())
    metrics = {
        "gradient_gap": gradient_gap,
        "edge_density": edge_density,
        "frequency_ratio": frequency_ratio,
        "evidence_count": evidence_count,
    }
    metrics.update(hits)
    return TypeEvidence(BLEND_BOUNDARY, evidence_count >= 2, metrics)


def decide_types(
    real: RgbImage,
    fake: RgbImage,
    region: PixelSet,
    mask: ForgeryMask,
    th: DetectorThresholds,
    band_px: int = BOUNDARY_BAND_PX,
    dct_band_fraction: float = 0.25,
) -> list[TypeEvidence]:
    """Run all five deciders on one facial region, in fixed type order.

    The blend-boundary decider runs on the forgery mask binarized at half
    its maximum, not on the facial region. A decider failure is recorded as
    an untriggered verdict with an error note instead of aborting the pair.
    """
    real_gray = to_grayscale(real)
    fake_gray = to_grayscale(fake)
    level = 0.5 * float(mask.values.max())
    binary = mask.binarize(level)

    runs = (
        (COLOR_DIFFERENCE, lambda: detect_color_difference(real, fake, region, th)),
        (BLUR, lambda: detect_blur(real_gray, fake_gray, region, th)),
        (STRUCTURE_ABNORMAL, lambda: detect_structure_abnormal(real_gray, fake_gray, region, th)),
        (TEXTURE_ABNORMAL, lambda: detect_texture_abnormal(real_gray, fake_gray, region, th)),
        (
            BLEND_BOUNDARY,
            lambda: detect_blend_boundary(
                fake_gray, binary, th, band_px=band_px, dct_band_fraction=dct_band_fraction
            ),
        ),
    )
    results = []
    for type_name, run in runs:
        try:
            results.append(run())
        except ForgetextError as exc:
            results.append(TypeEvidence(type_name, False, {}, error=str(exc)))
    return results
