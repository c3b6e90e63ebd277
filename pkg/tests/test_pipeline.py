import dataclasses
import json

import numpy as np
import pytest

from forgetext.cli import main as cli_main
from forgetext.errors import EmptyDataset
from forgetext.pipeline import (
    PipelineConfig,
    ingest,
    load_config,
    nearest_annotated_frame,
    pair_seed,
    parse_config_text,
    record_line,
    run_batch,
    run_pair,
)
from forgetext.vision import write_rgb_png

from synthetic import make_face, make_landmarks, write_dataset

CFG = PipelineConfig()


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    pair_ids = write_dataset(root, 8, seed=100)
    return root, pair_ids


# ---------------------------------------------------------------------------
# config


def test_default_config_digest_stable():
    assert PipelineConfig().digest() == PipelineConfig().digest()
    assert PipelineConfig(seed=1).digest() != PipelineConfig().digest()


def test_parse_config_text_round_trip():
    text = """
    # thresholds tuned for the synthetic fixtures
    region_threshold = 0.02
    seed = 9
    detectors.color_mean = 2.5
    detectors.canny_low = 40
    blend.enabled = false
    blend.alpha = 0.8
    annotate.captions_fake = 2
    annotate.noun = "person"
    refine.endpoint = "http://localhost:1234/v1"
    refine.max_concurrent = 2
    eval.mode = "macro"
    """
    cfg = parse_config_text(text)
    assert cfg.region_threshold == 0.02
    assert cfg.seed == 9
    assert cfg.detectors.color_mean == 2.5
    assert cfg.detectors.canny_low == 40
    assert cfg.blend_enabled is False
    assert cfg.blend.alpha == 0.8
    assert cfg.annotate.captions_fake == 2
    assert cfg.annotate.noun == "person"
    assert cfg.service.endpoint == "http://localhost:1234/v1"
    assert cfg.service.max_concurrent == 2
    assert cfg.evaluation.mode == "macro"


def test_parse_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        parse_config_text("regoin_threshold = 0.1")
    with pytest.raises(ValueError):
        parse_config_text("detectors.color_meen = 1.0")
    with pytest.raises(ValueError):
        parse_config_text("mystery.alpha = 1")


def test_load_config_default_is_default(tmp_path):
    assert load_config(None) == PipelineConfig()
    path = tmp_path / "cfg.txt"
    path.write_text("seed = 3\n")
    assert load_config(path).seed == 3


# ---------------------------------------------------------------------------
# seeds and frames


def test_pair_seed_stable_and_spread():
    a = pair_seed("noise/vid000_0", 0)
    assert a == pair_seed("noise/vid000_0", 0)
    assert a != pair_seed("noise/vid000_1", 0)
    assert a != pair_seed("noise/vid000_0", 1)
    assert 0 <= a < 2**64


def test_nearest_annotated_frame():
    assert nearest_annotated_frame([0, 10, 20], 12) == 10
    assert nearest_annotated_frame([0, 10, 20], 16) == 20
    assert nearest_annotated_frame([0, 10, 20], 15) == 10  # tie toward earlier
    assert nearest_annotated_frame([5], 100) == 5
    with pytest.raises(EmptyDataset):
        nearest_annotated_frame([], 3)


# ---------------------------------------------------------------------------
# ingest


def test_ingest_orders_and_parses(dataset):
    root, pair_ids = dataset
    result = ingest(root)
    assert [m.pair_id for m in result.manifests] == sorted(pair_ids)
    assert result.skipped == ()
    by_id = {m.pair_id: m for m in result.manifests}
    assert by_id[sorted(pair_ids)[0]].frame_index in (0, 1, 2)


def test_ingest_skips_incomplete(tmp_path):
    root = tmp_path / "ds"
    write_dataset(root, 3, seed=7)
    # orphan fake without real or landmarks
    orphan = root / "fake" / "noise" / "orphan_0.png"
    write_rgb_png(make_face(16, 16), orphan)
    result = ingest(root)
    assert any(s["pair_id"] == "noise/orphan_0" for s in result.skipped)
    assert all(m.pair_id != "noise/orphan_0" for m in result.manifests)


def test_ingest_empty_raises(tmp_path):
    with pytest.raises(EmptyDataset):
        ingest(tmp_path / "nothing")


def test_ingest_repeat_identical(dataset):
    root, _ = dataset
    first = ingest(root).manifests
    second = ingest(root).manifests
    assert first == second


# ---------------------------------------------------------------------------
# run_pair


def test_run_pair_identical_is_real_style(dataset):
    root, _ = dataset
    manifests = {m.method: m for m in ingest(root).manifests}
    record = run_pair(manifests["identical"], CFG)
    assert record["error"] is None
    assert record["label"] == "real"
    assert record["regions"] == []
    assert record["evidence"] == {}
    assert record["raw_annotation"]["full_text"] == "This is a real face."
    assert record["blend"] is None


def test_run_pair_mouth_edit(dataset):
    root, _ = dataset
    noise = next(m for m in ingest(root).manifests if m.method == "noise")
    record = run_pair(noise, CFG)
    assert record["error"] is None
    assert record["label"] == "fake"
    names = [e["name"] for e in record["regions"]]
    assert names  # at least one extracted region
    triggered = [
        ev["forgery_type"]
        for evs in record["evidence"].values()
        for ev in evs
        if ev["triggered"]
    ]
    assert triggered
    for name in names:
        assert name in record["raw_annotation"]["full_text"]


def test_run_pair_records_blend(dataset):
    root, _ = dataset
    fakes = [m for m in ingest(root).manifests if m.method != "identical"]
    kinds = set()
    for m in fakes:
        record = run_pair(m, CFG)
        if record["blend"]:
            kinds.add(record["blend"]["kind"])
    assert kinds <= {"alpha", "poisson"}
    assert kinds  # blending ran for at least one pair


def test_run_pair_error_isolated(tmp_path, dataset):
    root, _ = dataset
    manifest = ingest(root).manifests[0]
    broken = dataclasses.replace(manifest, landmark_path=tmp_path / "missing.json")
    record = run_pair(broken, CFG)
    assert record["error"] is not None
    assert record["pair_id"] == manifest.pair_id


def test_run_pair_deterministic(dataset):
    root, _ = dataset
    manifest = ingest(root).manifests[0]
    a = run_pair(manifest, CFG)
    b = run_pair(manifest, CFG)
    assert record_line(a) == record_line(b)


# ---------------------------------------------------------------------------
# run_batch


def test_run_batch_worker_counts_agree(dataset, tmp_path):
    root, _ = dataset
    manifests = ingest(root).manifests
    p1 = tmp_path / "w1.jsonl"
    p8 = tmp_path / "w8.jsonl"
    run_batch(manifests, CFG, workers=1, out_path=p1)
    run_batch(manifests, CFG, workers=8, out_path=p8)
    assert p1.read_bytes() == p8.read_bytes()


def test_run_batch_empty_manifests(tmp_path):
    out = tmp_path / "empty.jsonl"
    records, summary = run_batch([], CFG, workers=1, out_path=out)
    assert records == []
    assert out.read_text() == ""
    assert summary["pairs"] == 0


def test_run_batch_summary_matches_recount(dataset, tmp_path):
    root, _ = dataset
    manifests = ingest(root).manifests
    out = tmp_path / "records.jsonl"
    records, summary = run_batch(manifests, CFG, workers=2, out_path=out)
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(lines) == len(manifests)
    region_counts = {name: 0 for name in ("mouth", "nose", "eyes", "face")}
    for rec in lines:
        for entry in rec["regions"]:
            region_counts[entry["name"]] += 1
    assert summary["regions"] == region_counts
    assert summary["labels"]["real"] == sum(1 for r in lines if r["label"] == "real")


def test_records_round_trip_byte_identical(dataset):
    root, _ = dataset
    record = run_pair(ingest(root).manifests[0], CFG)
    line = record_line(record)
    assert record_line(json.loads(line)) == line


# ---------------------------------------------------------------------------
# cli


def test_cli_mask_regions_annotate(tmp_path, dataset, capsys):
    root, _ = dataset
    manifest = next(m for m in ingest(root).manifests if m.method == "color")
    out_png = tmp_path / "mask.png"
    assert (
        cli_main(
            ["mask", "--real", str(manifest.real_path), "--fake", str(manifest.fake_path), "--out", str(out_png)]
        )
        == 0
    )
    assert out_png.exists()

    out_json = tmp_path / "regions.json"
    code = cli_main(
        [
            "regions",
            "--real", str(manifest.real_path),
            "--fake", str(manifest.fake_path),
            "--landmarks", str(manifest.landmark_path),
            "--out", str(out_json),
        ]
    )
    assert code == 0
    payload = json.loads(out_json.read_text())
    assert set(payload["means"]) == {"mouth", "nose", "eyes", "face"}

    out_rec = tmp_path / "record.json"
    code = cli_main(
        [
            "annotate",
            "--real", str(manifest.real_path),
            "--fake", str(manifest.fake_path),
            "--landmarks", str(manifest.landmark_path),
            "--out", str(out_rec),
        ]
    )
    assert code == 0
    record = json.loads(out_rec.read_text())
    assert record["raw_annotation"]["full_text"].startswith("This is a")


def test_cli_run_and_eval(tmp_path, dataset):
    root, _ = dataset
    out_dir = tmp_path / "out"
    assert cli_main(["run", "--dataset", str(root), "--out", str(out_dir), "--workers", "2"]) == 0
    records_path = out_dir / "records.jsonl"
    assert records_path.exists()
    assert (out_dir / "summary.txt").exists()
    report_path = tmp_path / "report.json"
    assert cli_main(["eval", "--records", str(records_path), "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["precision"] == 1.0


def test_cli_blend(tmp_path, dataset):
    root, _ = dataset
    manifest = next(m for m in ingest(root).manifests if m.method == "noise")
    out_png = tmp_path / "blend.png"
    code = cli_main(
        [
            "blend",
            "--real", str(manifest.real_path),
            "--fake", str(manifest.fake_path),
            "--landmarks", str(manifest.landmark_path),
            "--out", str(out_png),
        ]
    )
    assert code == 0
    assert out_png.exists()


def test_cli_unknown_config_key_fails(tmp_path, dataset):
    root, _ = dataset
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_key = 1\n")
    code = cli_main(["run", "--dataset", str(root), "--out", str(tmp_path / "o"), "--config", str(cfg)])
    assert code == 2
