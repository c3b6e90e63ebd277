"""Dataset ingestion and orchestration of the full annotation pipeline.

A batch run is deterministic for a fixed (dataset, config, seed) with
refinement disabled: per-pair seeds derive from a stable hash of the pair
id, records carry no timestamps, and the writer restores manifest order
regardless of worker scheduling.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .annotate import build_raw_annotation
from .blend import BlendConfig, make_mixed_forgery
from .detectors import DetectorThresholds, decide_types
from .errors import EmptyDataset, ForgetextError
from .refine import AnnotationRefiner, ServiceConfig, build_prompt_bundle
from .region import (
    REGION_NAMES,
    ForgeryRegionList,
    Landmarks,
    extract_forgery_regions,
    generate_mask,
    partition_regions,
    select_region,
)
from .vision import read_rgb_png, write_rgb_png

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PairManifest:
    pair_id: str
    real_path: Path
    fake_path: Path
    landmark_path: Path
    method: str
    frame_index: int


@dataclass(frozen=True)
class AnnotateOptions:
    captions_fake: int = 3
    captions_real: int = 1
    noun: str = "face"

    def __post_init__(self):
        if self.captions_fake < 1 or self.captions_real < 1:
            raise ValueError("caption counts must be >= 1")
        if self.noun not in ("face", "person"):
            raise ValueError("noun must be 'face' or 'person'")


@dataclass(frozen=True)
class EvalOptions:
    mode: str = "micro"
    lexicon_path: str = ""

    def __post_init__(self):
        if self.mode not in ("micro", "macro"):
            raise ValueError("eval mode must be 'micro' or 'macro'")


@dataclass(frozen=True)
class PipelineConfig:
    region_threshold: float = 0.05
    seed: int = 0
    band_px: int = 5
    dct_band_fraction: float = 0.25
    detectors: DetectorThresholds = field(default_factory=DetectorThresholds)
    blend: BlendConfig = field(default_factory=BlendConfig)
    blend_enabled: bool = True
    annotate: AnnotateOptions = field(default_factory=AnnotateOptions)
    refine_enabled: bool = False
    service: ServiceConfig = field(default_factory=ServiceConfig)
    evaluation: EvalOptions = field(default_factory=EvalOptions)

    def __post_init__(self):
        if not 0.0 <= self.region_threshold <= 1.0:
            raise ValueError("region_threshold must lie in [0, 1]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# Flat config-file keys -> (section, field). Sectionless keys live on the
# top-level config.
_CONFIG_SECTIONS = {
    "detectors": DetectorThresholds,
    "blend": BlendConfig,
    "annotate": AnnotateOptions,
    "refine": ServiceConfig,
    "eval": EvalOptions,
}
_TOP_LEVEL_KEYS = {
    "region_threshold",
    "seed",
    "band_px",
    "dct_band_fraction",
    "blend_enabled",
    "refine_enabled",
}
_SECTION_ALIASES = {
    ("blend", "enabled"): ("top", "blend_enabled"),
    ("refine", "enabled"): ("top", "refine_enabled"),
    ("eval", "lexicon"): ("eval", "lexicon_path"),
    ("eval", "mode"): ("eval", "mode"),
}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str) -> PipelineConfig:
    """Parse ``key = value`` lines (dotted section keys, # comments) into a config.

    Unknown keys are rejected so a typo cannot silently fall back to a
    default threshold.
    """
    top: dict = {}
    sections: dict[str, dict] = {name: {} for name in _CONFIG_SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        value = _parse_value(raw.strip())
        if "." in key:
            section, _, fname = key.partition(".")
            alias = _SECTION_ALIASES.get((section, fname))
            if alias is not None:
                target, fname = alias
                if target == "top":
                    top[fname] = value
                    continue
                section = target
            if section not in _CONFIG_SECTIONS:
                raise ValueError(f"config line {lineno}: unknown section {section!r}")
            known = {f.name for f in dataclasses.fields(_CONFIG_SECTIONS[section])}
            if fname not in known:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            sections[section][fname] = value
        else:
            if key not in _TOP_LEVEL_KEYS:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            top[key] = value
    return PipelineConfig(
        detectors=DetectorThresholds(**sections["detectors"]),
        blend=BlendConfig(**sections["blend"]),
        annotate=AnnotateOptions(**sections["annotate"]),
        service=ServiceConfig(**sections["refine"]),
        evaluation=EvalOptions(**sections["eval"]),
        **top,
    )


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def pair_seed(pair_id: str, global_seed: int) -> int:
    """Stable 64-bit per-pair seed: hash of the pair id XOR the global seed."""
    digest = hashlib.sha256(pair_id.encode("utf-8")).digest()
    return (int.from_bytes(digest[:8], "big") ^ (global_seed & _MASK64)) & _MASK64


def nearest_annotated_frame(annotated: list[int], frame: int) -> int:
    """Closest annotated frame index, ties broken toward the earlier frame."""
    if not annotated:
        raise EmptyDataset("no annotated frames to look up")
    return min(annotated, key=lambda f: (abs(f - frame), f))


def _frame_index(stem: str) -> int:
    tail = stem.rsplit("_", 1)[-1]
    return int(tail) if tail.isdigit() else 0


@dataclass(frozen=True)
class IngestResult:
    manifests: tuple[PairManifest, ...]
    skipped: tuple[dict, ...]


def ingest(root) -> IngestResult:
    """Scan a ``real/``, ``fake/<method>/``, ``landmarks/`` tree into manifests.

    Pairs missing any component are reported in ``skipped`` and left out;
    manifest order is lexicographic by (method, id) and stable across runs.
    """
    root = Path(root)
    fake_root = root / "fake"
    manifests = []
    skipped = []
    method_dirs = sorted(d for d in fake_root.glob("*") if d.is_dir()) if fake_root.is_dir() else []
    for method_dir in method_dirs:
        for fake_path in sorted(method_dir.glob("*.png")):
            stem = fake_path.stem
            real_path = root / "real" / f"{stem}.png"
            landmark_path = root / "landmarks" / f"{stem}.json"
            missing = [
                str(p.relative_to(root)) for p in (real_path, landmark_path) if not p.is_file()
            ]
            if missing:
                skipped.append({"pair_id": f"{method_dir.name}/{stem}", "missing": missing})
                continue
            manifests.append(
                PairManifest(
                    pair_id=f"{method_dir.name}/{stem}",
                    real_path=real_path,
                    fake_path=fake_path,
                    landmark_path=landmark_path,
                    method=method_dir.name,
                    frame_index=_frame_index(stem),
                )
            )
    if not manifests:
        raise EmptyDataset(f"no complete real/fake/landmark triples under {root}")
    return IngestResult(tuple(manifests), tuple(skipped))


def run_pair(
    manifest: PairManifest,
    cfg: PipelineConfig,
    out_dir=None,
    refiner: AnnotationRefiner | None = None,
) -> dict:
    """Run every stage for one pair and return its self-contained record.

    Stage failures are captured in the record's ``error`` field; the batch
    never aborts because one pair is broken.
    """
    record: dict = {
        "pair_id": manifest.pair_id,
        "method": manifest.method,
        "frame_index": manifest.frame_index,
        "tool_version": __version__,
        "config_digest": cfg.digest(),
        "error": None,
        "label": None,
        "mask_stats": None,
        "regions": [],
        "evidence": {},
        "raw_annotation": None,
        "refined": None,
        "blend": None,
        "mask_path": None,
    }
    try:
        real = read_rgb_png(manifest.real_path)
        fake = read_rgb_png(manifest.fake_path)
        landmarks = Landmarks.from_json(manifest.landmark_path)

        mask = generate_mask(real, fake)
        region_map = partition_regions(landmarks, real.width, real.height)
        record["mask_stats"] = {
            name: float(mask.values[region_map[name].data].mean()) for name in REGION_NAMES
        }
        region_list = extract_forgery_regions(mask, region_map, cfg.region_threshold)
        record["regions"] = [{"name": n, "mean": m} for n, m in region_list.entries]
        label = "real" if region_list.is_empty() else "fake"
        record["label"] = label

        evidence_by_region = {}
        for name in region_list.names():
            evidence_by_region[name] = decide_types(
                real,
                fake,
                region_map[name],
                mask,
                cfg.detectors,
                band_px=cfg.band_px,
                dct_band_fraction=cfg.dct_band_fraction,
            )
        record["evidence"] = {
            name: [ev.to_dict() for ev in evs] for name, evs in evidence_by_region.items()
        }

        if out_dir is not None:
            mask_path = Path(out_dir) / "masks" / f"{manifest.pair_id}.png"
            mask_path.parent.mkdir(parents=True, exist_ok=True)
            mask.write_png(mask_path)
            record["mask_path"] = str(mask_path.relative_to(out_dir))

        if cfg.blend_enabled and label == "fake":
            seed = pair_seed(manifest.pair_id, cfg.seed)
            chosen = select_region(region_list, seed)
            try:
                mixed = make_mixed_forgery(real, fake, region_map[chosen], cfg.blend, seed)
                blend_info = {
                    "region": chosen,
                    "kind": mixed.kind,
                    "implied_types": list(mixed.implied_types),
                    "converged": mixed.converged,
                    "path": None,
                }
                if out_dir is not None:
                    blend_path = Path(out_dir) / "blends" / f"{manifest.pair_id}.png"
                    blend_path.parent.mkdir(parents=True, exist_ok=True)
                    write_rgb_png(mixed.image, blend_path)
                    blend_info["path"] = str(blend_path.relative_to(out_dir))
                record["blend"] = blend_info
            except ForgetextError as exc:
                record["blend"] = {"region": chosen, "kind": None, "error": str(exc)}

        raw = build_raw_annotation(region_list, evidence_by_region, label, cfg.annotate.noun)
        record["raw_annotation"] = raw.to_dict()

        if cfg.refine_enabled and refiner is not None:
            k = cfg.annotate.captions_fake if label == "fake" else cfg.annotate.captions_real
            flat_evidence = [ev for evs in evidence_by_region.values() for ev in evs]
            bundle = build_prompt_bundle(real, fake, raw, flat_evidence, k, cfg.annotate.noun)
            record["refined"] = refiner.refine(bundle, label).to_dict()
    except Exception as exc:  # per-pair isolation
        logger.warning("pair %s failed: %s", manifest.pair_id, exc)
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def record_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def summarize(records: list[dict], skipped=()) -> dict:
    summary = {
        "pairs": len(records),
        "skipped": len(skipped),
        "errors": sum(1 for r in records if r["error"]),
        "labels": {"real": 0, "fake": 0},
        "regions": {name: 0 for name in REGION_NAMES},
        "types": {},
        "low_evidence": 0,
        "blend_kinds": {},
        "refine_sources": {},
    }
    for record in records:
        if record["label"] in summary["labels"]:
            summary["labels"][record["label"]] += 1
        for entry in record["regions"]:
            summary["regions"][entry["name"]] += 1
        for evs in record["evidence"].values():
            for ev in evs:
                if ev["triggered"]:
                    summary["types"][ev["forgery_type"]] = (
                        summary["types"].get(ev["forgery_type"], 0) + 1
                    )
        raw = record["raw_annotation"]
        if raw and raw.get("low_evidence"):
            summary["low_evidence"] += 1
        blend = record["blend"]
        if blend and blend.get("kind"):
            summary["blend_kinds"][blend["kind"]] = (
                summary["blend_kinds"].get(blend["kind"], 0) + 1
            )
        refined = record["refined"]
        if refined:
            summary["refine_sources"][refined["source"]] = (
                summary["refine_sources"].get(refined["source"], 0) + 1
            )
    return summary


def run_batch(
    manifests,
    cfg: PipelineConfig,
    workers: int = 1,
    out_path=None,
    out_dir=None,
    skipped=(),
) -> tuple[list[dict], dict]:
    """Process pairs with a worker pool, writing records in manifest order."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    refiner = AnnotationRefiner(cfg.service, cfg.annotate.noun) if cfg.refine_enabled else None

    if workers == 1:
        records = [run_pair(m, cfg, out_dir, refiner) for m in manifests]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda m: run_pair(m, cfg, out_dir, refiner), manifests))

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(record_line(record) + "\n")
    return records, summarize(records, skipped)
