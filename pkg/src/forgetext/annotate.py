"""Deterministic raw-annotation text from extracted regions and triggered types."""

from __future__ import annotations

from dataclasses import dataclass, field

from .detectors import (
    BLEND_BOUNDARY,
    BLUR,
    COLOR_DIFFERENCE,
    STRUCTURE_ABNORMAL,
    TEXTURE_ABNORMAL,
    TypeEvidence,
)
from .errors import UnknownType
from .region import ForgeryRegionList

CONNECTIVES = {
    COLOR_DIFFERENCE: "the {region} has inconsistent colors",
    BLUR: "the {region} appears blurry compared to natural faces",
    TEXTURE_ABNORMAL: "the {region} lacks natural texture",
    STRUCTURE_ABNORMAL: "the {region} shows structural distortion deviating from natural appearance",
}

BOUNDARY_CLAUSES = (
    ("gradient_hit", "sharp changes in image gradients at the boundaries"),
    ("edge_hit", "unnatural edge patterns"),
    ("frequency_hit", "unusual frequency patterns at the boundaries"),
)


def mandatory_phrase(label: str, noun: str = "face") -> str:
    return f"This is a {label} {noun}"


@dataclass(frozen=True)
class RawAnnotation:
    label: str  # "real" or "fake"
    statements: tuple[tuple[str, str, str], ...]  # (region, forgery_type, phrase)
    full_text: str
    low_evidence: bool = False

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "statements": [
                {"region": r, "forgery_type": t, "phrase": p} for r, t, p in self.statements
            ],
            "full_text": self.full_text,
            "low_evidence": self.low_evidence,
        }


def phrase_for(region: str, forgery_type: str, evidence: TypeEvidence | None = None) -> str:
    """Connective phrase for one (region, type) finding.

    Blend-boundary phrases append one clause per boundary metric that
    exceeded its threshold, read from the evidence hits.
    """
    if forgery_type in CONNECTIVES:
        return CONNECTIVES[forgery_type].format(region=region)
    if forgery_type == BLEND_BOUNDARY:
        clauses = []
        if evidence is not None:
            clauses = [
                text for key, text in BOUNDARY_CLAUSES if evidence.metrics.get(key, 0.0) > 0.0
            ]
        base = f"the {region} shows blending artifacts"
        if not clauses:
            return base
        return base + " characterized by " + " and ".join(clauses)
    raise UnknownType(f"no phrase for forgery type {forgery_type!r}")


def build_raw_annotation(
    regions: ForgeryRegionList,
    evidence_by_region: dict[str, list[TypeEvidence]],
    label: str,
    noun: str = "face",
) -> RawAnnotation:
    """Render the templated sentence for one image pair.

    Statements are enumerated region-major in list order, with types in the
    fixed decider order. A fake pair where some extracted region triggered
    nothing is flagged low-evidence instead of failing.
    """
    if label == "real":
        return RawAnnotation("real", (), f"{mandatory_phrase('real', noun)}.")

    statements = []
    low_evidence = False
    for name in regions.names():
        triggered_here = 0
        for ev in evidence_by_region.get(name, []):
            if ev.triggered:
                statements.append((name, ev.forgery_type, phrase_for(name, ev.forgery_type, ev)))
                triggered_here += 1
        if triggered_here == 0:
            low_evidence = True

    prefix = mandatory_phrase("fake", noun)
    if statements:
        full_text = prefix + ", " + "; ".join(p for _, _, p in statements) + "."
    else:
        full_text = prefix + "."
    return RawAnnotation("fake", tuple(statements), full_text, low_evidence)
