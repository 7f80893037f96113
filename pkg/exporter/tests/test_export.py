"""Exporter suite: the round-trip shipping criterion plus unit coverage.

The round-trip test prints one `[criterion 9] PASS/FAIL` line in the style
of the engine's acceptance gate. Everything here exercises the exporter
against the primary package only through its public reader and CLI.
"""

import json
import os
import subprocess
import sys
from contextlib import contextmanager

import numpy as np
import pytest
from PIL import Image, ImageDraw

from scmap.tensor_store import Tensor, read_tensor, write_tensor

from scmap_exporter import (
    ExportValidationError,
    UnsupportedArchitectureError,
    cross_check,
    export_dataset,
    export_head,
    export_image,
    load_model,
)
from scmap_exporter.cli import main as cli_main
from scmap_exporter.model import seeded_head
from scmap_exporter.preprocess import MEAN, STD, preprocess_image
from scmap_exporter.writer import tensor_bytes

SEED = 7


@contextmanager
def criterion(num, label):
    try:
        yield
    except BaseException:
        print(f"\n[criterion {num}] FAIL - {label}")
        raise
    print(f"\n[criterion {num}] PASS - {label}")


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("images")
    img = Image.new("RGB", (300, 240), (40, 90, 60))
    draw = ImageDraw.Draw(img)
    draw.rectangle([80, 60, 200, 170], fill=(230, 120, 30))
    draw.ellipse([20, 20, 60, 60], fill=(200, 200, 220))
    img.save(d / "photo0.png")
    Image.new("L", (180, 260), 130).save(d / "gray1.png")  # grayscale input
    return d


@pytest.fixture(scope="session")
def export_dir(tmp_path_factory, image_dir):
    out = tmp_path_factory.mktemp("export")
    export_dataset(image_dir, out, seed=SEED)
    return out


def _snapshot(root):
    out = {}
    for name in sorted(os.listdir(root)):
        with open(os.path.join(root, name), "rb") as fh:
            out[name] = fh.read()
    return out


# --- 9: exporter round-trip -----------------------------------------------


def test_criterion_9_round_trip(tmp_path, image_dir, export_dir):
    with criterion(9, "export round-trip through the primary reader and CLI"):
        # every exported tensor loads in the primary reader, shapes + checksums match
        report = cross_check(os.path.join(export_dir, "manifest.jsonl"))
        assert report.passed
        assert len(report.results) == 6  # head kernel/bias + 2 images x (attn, tokens)

        # attention rows are distributions within 1e-4
        for image_id in ("photo0", "gray1"):
            stack = read_tensor(os.path.join(export_dir, f"{image_id}.attn.scmt")).to_array()
            assert stack.shape == (4, 197, 197)
            assert np.abs(stack.sum(axis=-1) - 1.0).max() <= 1e-4

        # same seed + model re-exported from a fresh process is byte-identical
        rerun = tmp_path / "rerun"
        proc = subprocess.run(
            [
                "scmap-export", "export",
                "--images", str(image_dir),
                "--out", str(rerun),
                "--seed", str(SEED),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert _snapshot(export_dir) == _snapshot(rerun)

        # a corrupted tensor is a named failure
        broken = tmp_path / "broken"
        broken.mkdir()
        for name, blob in _snapshot(export_dir).items():
            (broken / name).write_bytes(blob)
        victim = "photo0.tokens.scmt"
        blob = bytearray((broken / victim).read_bytes())
        blob[9] ^= 0xFF  # clobber a header dim
        (broken / victim).write_bytes(bytes(blob))
        bad = cross_check(broken / "manifest.jsonl")
        assert not bad.passed
        failures = {name for name, ok, _ in bad.results if not ok}
        assert failures == {victim}

        # one real image flows through the engine's predict into a valid box
        calib = tmp_path / "calib"
        pred = tmp_path / "pred"
        for args in (
            ["calibrate", "--tensors", str(export_dir), "--out", str(calib)],
            [
                "predict",
                "--tensors", str(calib),
                "--annotations", os.path.join(export_dir, "annotations.jsonl"),
                "--out", str(pred),
            ],
        ):
            proc = subprocess.run(
                [sys.executable, "-m", "scmap.cli", *args], capture_output=True, text=True
            )
            assert proc.returncode == 0, proc.stderr
        with open(pred / "boxes.jsonl", encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh]
        assert len(records) == 2
        for rec in records:
            assert rec["box"] is not None
            x0, y0, x1, y1 = rec["box"]
            assert 0 <= x0 < x1 <= 224 and 0 <= y0 < y1 <= 224

        # the primary suite stays runnable with no secondary component built
        primary_tests = os.path.join(os.path.dirname(__file__), "..", "..", "tests")
        for name in os.listdir(primary_tests):
            if name.endswith(".py"):
                with open(os.path.join(primary_tests, name), encoding="utf-8") as fh:
                    assert "scmap_exporter" not in fh.read(), name


# --- unit coverage ----------------------------------------------------------


def test_unknown_model_is_named():
    with pytest.raises(ExportValidationError, match="no-such-model"):
        load_model("no-such-model")


def test_model_without_cls_token_is_unsupported(tmp_path, image_dir):
    model = load_model("mini-vit-nocls", seed=SEED)
    src = os.path.join(image_dir, "photo0.png")
    with pytest.raises(UnsupportedArchitectureError, match="CLS"):
        export_image(src, model, tmp_path, "photo0")


def test_head_shape_validation(tmp_path):
    with pytest.raises(ExportValidationError, match="kernel"):
        export_head(np.zeros((5, 5, 4, 2), dtype=np.float32), np.zeros(2), tmp_path)
    with pytest.raises(ExportValidationError, match="bias"):
        export_head(np.zeros((3, 3, 4, 2), dtype=np.float32), np.zeros(3), tmp_path)


def test_seeded_head_reproducible():
    k1, b1 = seeded_head(8, 3, seed=5)
    k2, b2 = seeded_head(8, 3, seed=5)
    k3, _ = seeded_head(8, 3, seed=6)
    assert np.array_equal(k1, k2) and np.array_equal(b1, b2)
    assert not np.array_equal(k1, k3)
    assert k1.shape == (3, 3, 8, 3) and b1.shape == (3,)


def test_preprocess_grayscale_and_constants(image_dir):
    arr = preprocess_image(os.path.join(image_dir, "gray1.png"))
    assert arr.shape == (3, 224, 224) and arr.dtype == np.float32
    # constant gray 130 image: every pixel is exactly the normalized constant
    for c in range(3):
        want = (np.float32(130) / np.float32(255) - np.float32(MEAN[c])) / np.float32(STD[c])
        assert np.allclose(arr[c], want, rtol=0, atol=1e-6)


def test_writer_matches_primary_format(tmp_path):
    rng = np.random.default_rng(3)
    arr = rng.normal(size=(2, 3, 4)).astype(np.float32)
    primary_path = tmp_path / "primary.scmt"
    write_tensor(primary_path, Tensor.from_array(arr))
    assert tensor_bytes(arr) == primary_path.read_bytes()


def test_writer_rejects_bad_ranks():
    with pytest.raises(ExportValidationError, match="rank"):
        tensor_bytes(np.float32(3.0))
    with pytest.raises(ExportValidationError, match="rank"):
        tensor_bytes(np.zeros((1, 1, 1, 1, 1), dtype=np.float32))


def test_cross_check_empty_manifest_is_vacuous(tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text(json.dumps({"kind": "export", "images": []}) + "\n")
    report = cross_check(manifest)
    assert report.passed and report.results == []


def test_cross_check_flags_shape_drift(tmp_path, export_dir):
    snapshot = _snapshot(export_dir)
    for name, blob in snapshot.items():
        (tmp_path / name).write_bytes(blob)
    records = [
        json.loads(line)
        for line in (tmp_path / "manifest.jsonl").read_text().splitlines()
    ]
    for record in records:
        if record["kind"] == "head":
            record["shapes"]["bias"] = [999]
    with open(tmp_path / "manifest.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    report = cross_check(tmp_path / "manifest.jsonl")
    assert not report.passed
    bad = {name: detail for name, ok, detail in report.results if not ok}
    assert set(bad) == {"head.bias.scmt"}
    assert "shape" in bad["head.bias.scmt"]


def test_cli_check_exit_codes(tmp_path, export_dir, capsys):
    assert cli_main(["check", "--manifest", os.path.join(export_dir, "manifest.jsonl")]) == 0
    out = capsys.readouterr().out
    assert "all files pass" in out

    broken = tmp_path / "broken"
    broken.mkdir()
    for name, blob in _snapshot(export_dir).items():
        (broken / name).write_bytes(blob)
    (broken / "gray1.attn.scmt").write_bytes(b"SCMX" + b"\x00" * 16)
    assert cli_main(["check", "--manifest", str(broken / "manifest.jsonl")]) == 1
    out = capsys.readouterr().out
    assert "gray1.attn.scmt" in out and "FAIL" in out


def test_cli_unknown_model_fails_cleanly(tmp_path, image_dir, capsys):
    code = cli_main(
        ["export", "--images", str(image_dir), "--out", str(tmp_path / "x"), "--model", "vgg"]
    )
    assert code == 1
    assert "vgg" in capsys.readouterr().err


def test_manifest_records_model_and_preprocessing(export_dir):
    with open(os.path.join(export_dir, "manifest.jsonl"), encoding="utf-8") as fh:
        header = json.loads(fh.readline())
    assert header["kind"] == "export"
    assert header["model"] == "mini-vit"
    assert header["weights"] == "untrained-seeded"
    assert header["grid"] == [14, 14]
    assert header["images"] == ["gray1", "photo0"]
    pre = header["preprocess"]
    assert pre["resize"] == [256, 256] and pre["crop"] == [224, 224]
    assert pre["mean"] == list(MEAN) and pre["std"] == list(STD)
    assert pre["interpolation"] == "bilinear" and pre["crop_mode"] == "center"


def test_export_lists_every_path_it_wrote(export_dir):
    with open(os.path.join(export_dir, "manifest.jsonl"), encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh]
    listed = {name for r in records for name in r.get("files", {}).values()}
    on_disk = set(os.listdir(export_dir)) - {"manifest.jsonl", "annotations.jsonl"}
    assert listed == on_disk
