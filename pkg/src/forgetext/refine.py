"""Four-part refinement prompts and the remote caption-refinement client.

The client is total at its boundary: every call yields a RefinedAnnotation,
falling back to the raw templated text when the service is unreachable or
returns an invalid payload.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image

from .annotate import RawAnnotation, mandatory_phrase
from .detectors import (
    BLEND_BOUNDARY,
    BLUR,
    COLOR_DIFFERENCE,
    STRUCTURE_ABNORMAL,
    TEXTURE_ABNORMAL,
    TypeEvidence,
)
from .errors import AuthError, SchemaError
from .vision import RgbImage

SEPARATOR_WIDTH = 8
SEPARATOR_GRAY = 128

API_KEY_ENV = "FFTG_API_KEY"

DERIVATIONS = {
    COLOR_DIFFERENCE: (
        "Color difference was determined by comparing channel-wise mean and "
        "standard deviation statistics in Lab color space between the paired regions."
    ),
    BLUR: (
        "Blur was determined by comparing the variance of the Laplacian "
        "response of the region in both images."
    ),
    STRUCTURE_ABNORMAL: (
        "Structural deformation was determined through SSIM comparison "
        "between the paired regions."
    ),
    TEXTURE_ABNORMAL: (
        "Texture abnormality was identified using GLCM contrast analysis "
        "of the paired regions."
    ),
    BLEND_BOUNDARY: (
        "Blending artifacts were identified from gradient, edge, and "
        "frequency statistics over the manipulation mask's boundary band."
    ),
}


@dataclass(frozen=True)
class PromptBundle:
    """The four prompt components plus the raw annotation payload."""

    visual: RgbImage
    guide: str
    task: str
    predefined: str
    raw_text: str
    caption_count: int


@dataclass(frozen=True)
class RefinedAnnotation:
    captions: tuple[str, ...]
    source: str  # "remote" or "fallback_raw"
    model_id: str
    request_digest: str

    def to_dict(self) -> dict:
        return {
            "captions": list(self.captions),
            "source": self.source,
            "model_id": self.model_id,
            "request_digest": self.request_digest,
        }


@dataclass(frozen=True)
class ServiceConfig:
    endpoint: str = ""
    model: str = ""
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 1.0
    max_concurrent: int = 4

    def __post_init__(self):
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")

    def credential(self) -> str:
        return os.environ.get(API_KEY_ENV, "")


def _nearest_resize(arr: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    h, w = arr.shape[:2]
    rows = np.minimum(((np.arange(new_h) + 0.5) * h / new_h).astype(int), h - 1)
    cols = np.minimum(((np.arange(new_w) + 0.5) * w / new_w).astype(int), w - 1)
    return arr[rows][:, cols]


def build_visual_prompt(real: RgbImage, fake: RgbImage) -> RgbImage:
    """Horizontal composite [fake | mid-gray separator | real].

    A fake of different height is first resized to the real's height with
    nearest-neighbor sampling, preserving aspect ratio.
    """
    fake_arr = fake.data
    if fake.height != real.height:
        new_h = real.height
        new_w = max(1, round(fake.width * real.height / fake.height))
        fake_arr = _nearest_resize(fake_arr, new_h, new_w)
    separator = np.full((real.height, SEPARATOR_WIDTH, 3), SEPARATOR_GRAY, dtype=np.uint8)
    return RgbImage(np.concatenate([fake_arr, separator, real.data], axis=1))


def build_guide_prompt(raw: RawAnnotation, evidence: list[TypeEvidence]) -> str:
    lines = [
        "The left side of the attached image is the suspected fake face and "
        "the right side is the corresponding real face.",
        f"An automated comparison of the pair produced this raw annotation: "
        f'"{raw.full_text}"',
    ]
    triggered_types = []
    for ev in evidence:
        if ev.triggered and ev.forgery_type not in triggered_types:
            triggered_types.append(ev.forgery_type)
    if triggered_types:
        lines.append("How each finding was derived:")
        lines.extend(f"- {DERIVATIONS[t]}" for t in triggered_types)
    else:
        lines.append(
            "The automated comparison found no region whose artifacts "
            "exceeded the detection thresholds."
        )
    return "\n".join(lines)


def build_task_prompt() -> str:
    return (
        "You are an expert in face forgery analysis. Compare the two faces "
        "step by step: examine the mouth, nose, eyes, and the rest of the "
        "face; check colors, sharpness, structure, texture, and any blending "
        "seams; then describe the manipulation artifacts you can actually "
        "see, grounded in the raw annotation above. Do not invent artifacts "
        "that are not visible."
    )


def build_predefined_prompt(label: str, k: int, noun: str = "face") -> str:
    phrase = mandatory_phrase(label, noun)
    return (
        "Respond with a single JSON object and nothing else, shaped exactly "
        'as {"is_fake": <boolean>, "captions": [<strings>]}. '
        f"Provide exactly {k} caption(s). Every caption must contain the "
        f'exact phrase "{phrase}".'
    )


def build_prompt_bundle(
    real: RgbImage,
    fake: RgbImage,
    raw: RawAnnotation,
    evidence: list[TypeEvidence],
    k: int,
    noun: str = "face",
) -> PromptBundle:
    if k < 1:
        raise ValueError("caption count must be >= 1")
    return PromptBundle(
        visual=build_visual_prompt(real, fake),
        guide=build_guide_prompt(raw, evidence),
        task=build_task_prompt(),
        predefined=build_predefined_prompt(raw.label, k, noun),
        raw_text=raw.full_text,
        caption_count=k,
    )


def _first_json_object(body: str):
    decoder = json.JSONDecoder()
    idx = body.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(body, idx)
            return obj
        except json.JSONDecodeError:
            idx = body.find("{", idx + 1)
    return None


def parse_and_validate_response(body: str, label: str, k: int, noun: str = "face") -> list[str]:
    """Extract and validate the caption payload from a response body.

    Tolerates prose and code fences around the JSON object. Raises
    SchemaError with a machine-readable reason on any violation.
    """
    payload = _first_json_object(body)
    if payload is None:
        raise SchemaError("no_json", "no JSON object found in response body")
    if not isinstance(payload, dict):
        raise SchemaError("bad_payload", "top-level JSON value is not an object")
    if not isinstance(payload.get("is_fake"), bool):
        raise SchemaError("bad_payload", "missing boolean field is_fake")
    captions = payload.get("captions")
    if not isinstance(captions, list) or not all(isinstance(c, str) for c in captions):
        raise SchemaError("bad_payload", "captions must be a list of strings")
    if payload["is_fake"] != (label == "fake"):
        raise SchemaError("label_mismatch", f"is_fake contradicts label {label!r}")
    if len(captions) != k:
        raise SchemaError("caption_count", f"expected {k} captions, got {len(captions)}")
    phrase = mandatory_phrase(label, noun)
    for caption in captions:
        if phrase not in caption:
            raise SchemaError("missing_phrase", f"caption lacks the phrase {phrase!r}")
    return captions


def _png_data_url(img: RgbImage) -> str:
    buf = io.BytesIO()
    Image.fromarray(img.data, mode="RGB").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


class AnnotationRefiner:
    """Shareable chat-completion client with bounded in-flight requests."""

    def __init__(self, cfg: ServiceConfig, noun: str = "face"):
        self.cfg = cfg
        self.noun = noun
        self._permits = threading.BoundedSemaphore(cfg.max_concurrent)
        self._session = requests.Session()

    def _payload(self, bundle: PromptBundle) -> dict:
        return {
            "model": self.cfg.model,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {
                            "type": "image_url",
                            "image_url": {"url": _png_data_url(bundle.visual)},
                        },
                        {"type": "text", "text": bundle.guide},
                        {"type": "text", "text": bundle.task},
                        {"type": "text", "text": bundle.predefined},
                    ],
                }
            ],
        }

    def _post(self, payload: dict) -> str:
        headers = {"Content-Type": "application/json"}
        credential = self.cfg.credential()
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        with self._permits:
            response = self._session.post(
                self.cfg.endpoint, json=payload, headers=headers, timeout=self.cfg.timeout
            )
        if response.status_code in (401, 403):
            raise AuthError(f"service rejected credential (HTTP {response.status_code})")
        response.raise_for_status()
        data = response.json()
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaError("bad_payload", f"malformed completion envelope: {exc}")

    def refine(self, bundle: PromptBundle, label: str) -> RefinedAnnotation:
        payload = self._payload(bundle)
        digest = hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode("utf-8")
        ).hexdigest()

        fallback = RefinedAnnotation((bundle.raw_text,), "fallback_raw", "", digest)
        repair_left = 1
        attempt = 0
        while attempt <= self.cfg.retries:
            try:
                body = self._post(payload)
            except AuthError:
                return fallback
            except (requests.Timeout, requests.ConnectionError, requests.HTTPError):
                attempt += 1
                if attempt > self.cfg.retries:
                    return fallback
                time.sleep(self.cfg.backoff * (2 ** (attempt - 1)))
                continue
            except SchemaError:
                body = ""
            try:
                captions = parse_and_validate_response(
                    body, label, bundle.caption_count, self.noun
                )
                return RefinedAnnotation(tuple(captions), "remote", self.cfg.model, digest)
            except SchemaError as exc:
                if repair_left > 0:
                    repair_left -= 1
                    payload = self._payload(bundle)
                    payload["messages"].append(
                        {
                            "role": "user",
                            "content": [
                                {
                                    "type": "text",
                                    "text": (
                                        f"Your previous answer was rejected ({exc.reason}). "
                                        + bundle.predefined
                                    ),
                                }
                            ],
                        }
                    )
                    continue
                return fallback
        return fallback


def refine_annotation(
    bundle: PromptBundle, cfg: ServiceConfig, label: str, noun: str = "face"
) -> RefinedAnnotation:
    """One-shot refinement; see AnnotationRefiner for the shared client."""
    return AnnotationRefiner(cfg, noun).refine(bundle, label)
