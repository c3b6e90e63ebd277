"""Command-line interface: per-stage subcommands plus the full pipeline run."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .evaluate import load_lexicon, response_accuracy, score_annotations
from .pipeline import (
    PairManifest,
    ingest,
    load_config,
    pair_seed,
    run_batch,
    run_pair,
    summarize,
)
from .region import Landmarks, extract_forgery_regions, generate_mask, partition_regions
from .vision import read_rgb_png

logger = logging.getLogger(__name__)


def _config_from_args(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _manifest_from_args(args) -> PairManifest:
    stem = Path(args.fake).stem
    return PairManifest(
        pair_id=stem,
        real_path=Path(args.real),
        fake_path=Path(args.fake),
        landmark_path=Path(args.landmarks),
        method="cli",
        frame_index=0,
    )


def _write_json(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_mask(args) -> int:
    real = read_rgb_png(args.real)
    fake = read_rgb_png(args.fake)
    mask = generate_mask(real, fake)
    mask.write_png(args.out)
    print(f"wrote {args.out} (max={mask.values.max():.4f}, mean={mask.values.mean():.6f})")
    return 0


def cmd_regions(args) -> int:
    cfg = _config_from_args(args)
    real = read_rgb_png(args.real)
    fake = read_rgb_png(args.fake)
    mask = generate_mask(real, fake)
    region_map = partition_regions(Landmarks.from_json(args.landmarks), real.width, real.height)
    region_list = extract_forgery_regions(mask, region_map, cfg.region_threshold)
    payload = {
        "threshold": cfg.region_threshold,
        "means": {
            name: float(mask.values[region_map[name].data].mean())
            for name in region_map.regions
        },
        "extracted": [{"name": n, "mean": m} for n, m in region_list.entries],
    }
    _write_json(payload, args.out)
    return 0


def _run_single(args, blend: bool, refine: bool) -> dict:
    cfg = _config_from_args(args)
    cfg = dataclasses.replace(cfg, blend_enabled=blend, refine_enabled=refine)
    refiner = None
    if refine:
        from .refine import AnnotationRefiner

        refiner = AnnotationRefiner(cfg.service, cfg.annotate.noun)
    out_dir = Path(args.out).parent if getattr(args, "out", None) else None
    return run_pair(_manifest_from_args(args), cfg, out_dir, refiner)


def cmd_annotate(args) -> int:
    record = _run_single(args, blend=False, refine=False)
    _write_json(record, args.out)
    return 0 if record["error"] is None else 1


def cmd_refine(args) -> int:
    record = _run_single(args, blend=False, refine=True)
    _write_json(record, args.out)
    return 0 if record["error"] is None else 1


def cmd_blend(args) -> int:
    from .blend import make_mixed_forgery
    from .region import select_region
    from .vision import write_rgb_png

    cfg = _config_from_args(args)
    real = read_rgb_png(args.real)
    fake = read_rgb_png(args.fake)
    mask = generate_mask(real, fake)
    region_map = partition_regions(Landmarks.from_json(args.landmarks), real.width, real.height)
    region_list = extract_forgery_regions(mask, region_map, cfg.region_threshold)
    seed = pair_seed(Path(args.fake).stem, cfg.seed)
    chosen = select_region(region_list, seed)
    mixed = make_mixed_forgery(real, fake, region_map[chosen], cfg.blend, seed)
    write_rgb_png(mixed.image, args.out)
    print(f"wrote {args.out} (region={chosen}, kind={mixed.kind}, converged={mixed.converged})")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    lexicon = load_lexicon(cfg.evaluation.lexicon_path or None)
    records = []
    texts_and_labels = []
    with open(args.records, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("error"):
                continue
            truth = {entry["name"] for entry in rec.get("regions", [])}
            if args.source == "refined" and rec.get("refined"):
                text = " ".join(rec["refined"]["captions"])
            else:
                text = rec["raw_annotation"]["full_text"] if rec.get("raw_annotation") else ""
            records.append((text, truth))
            texts_and_labels.append((text, rec.get("label")))
    report = score_annotations(records, lexicon, cfg.evaluation.mode)
    payload = report.to_dict()
    labels = [label for _, label in texts_and_labels if label in ("real", "fake")]
    if labels and len(labels) == len(texts_and_labels):
        payload["response_accuracy"] = response_accuracy(
            [text for text, _ in texts_and_labels], labels
        )
    _write_json(payload, args.out)
    print(report.to_table())
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = ingest(args.dataset)
    for skip in result.skipped:
        logger.warning("skipping %s: missing %s", skip["pair_id"], ", ".join(skip["missing"]))
    out_dir = Path(args.out)
    records, summary = run_batch(
        result.manifests,
        cfg,
        workers=args.workers,
        out_path=out_dir / "records.jsonl",
        out_dir=out_dir,
        skipped=result.skipped,
    )
    summary_text = json.dumps(summary, indent=2, sort_keys=True)
    (out_dir / "summary.txt").write_text(summary_text + "\n", encoding="utf-8")
    print(summary_text)
    return 0 if summary["errors"] == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forgetext",
        description="Mask-guided forgery annotation for paired real/fake face images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, pair=False, config=True):
        if config:
            p.add_argument("--config", default=None, help="key = value config file")
            p.add_argument("--seed", type=int, default=None)
        if pair:
            p.add_argument("--real", required=True)
            p.add_argument("--fake", required=True)

    p = sub.add_parser("mask", help="write the forgery mask PNG for one pair")
    add_common(p, pair=True, config=False)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mask)

    p = sub.add_parser("regions", help="per-region mask means and the extracted list")
    add_common(p, pair=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_regions)

    p = sub.add_parser("annotate", help="full raw annotation record for one pair")
    add_common(p, pair=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("refine", help="annotate one pair and refine captions remotely")
    add_common(p, pair=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_refine)

    p = sub.add_parser("blend", help="write a mixed forgery PNG for one pair")
    add_common(p, pair=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_blend)

    p = sub.add_parser("eval", help="score a records JSONL against its own masks")
    add_common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--source", choices=("raw", "refined"), default="raw")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("run", help="run the full pipeline over a dataset tree")
    add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
