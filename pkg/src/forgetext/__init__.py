"""Mask-guided forgery annotation for paired real/fake face images."""

__version__ = "0.1.0"

from .annotate import RawAnnotation, build_raw_annotation, phrase_for
from .blend import BlendConfig, MixedForgery, alpha_blend, make_mixed_forgery, poisson_blend
from .detectors import (
    FORGERY_TYPES,
    DetectorThresholds,
    TypeEvidence,
    decide_types,
    detect_blend_boundary,
    detect_blur,
    detect_color_difference,
    detect_structure_abnormal,
    detect_texture_abnormal,
)
from .errors import ForgetextError
from .evaluate import (
    EvalReport,
    extract_region_mentions,
    load_lexicon,
    response_accuracy,
    score_annotations,
)
from .refine import (
    AnnotationRefiner,
    PromptBundle,
    RefinedAnnotation,
    ServiceConfig,
    build_prompt_bundle,
    build_visual_prompt,
    parse_and_validate_response,
    refine_annotation,
)
from .region import (
    REGION_NAMES,
    ForgeryMask,
    ForgeryRegionList,
    Landmarks,
    RegionMap,
    extract_forgery_regions,
    generate_mask,
    partition_regions,
    select_region,
)
from .vision import (
    GrayImage,
    LabImage,
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

__all__ = [name for name in dir() if not name.startswith("_")]
