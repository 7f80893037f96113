"""Synthetic fixture generator: determinism and planted-signal guarantees."""

import numpy as np
import pytest

from scmap.backbone_adapter import (
    AttentionStack,
    SemanticHead,
    TokenGrid,
    apply_semantic_head,
    assemble_attention,
    load_stack,
)
from scmap.errors import ArgumentError
from scmap.synth import delta_head, generate_fixture, write_dataset
from scmap.tensor_store import read_annotations, read_tensor


def test_delta_head_reproduces_tokens():
    kernel, bias = delta_head(4)
    tokens = np.random.default_rng(0).random((9, 4))
    out = apply_semantic_head(
        TokenGrid(tokens=tokens, grid=(3, 3)), SemanticHead(kernel=kernel, bias=bias)
    )
    assert np.array_equal(out, tokens.reshape(3, 3, 4))


def test_fixture_is_deterministic():
    a = generate_fixture(42, 3)
    b = generate_fixture(42, 3)
    assert np.array_equal(a["attn"], b["attn"])
    assert np.array_equal(a["tokens"], b["tokens"])
    assert a["annotation"] == b["annotation"]


def test_fixture_index_and_seed_change_content():
    base = generate_fixture(42, 0)
    other_index = generate_fixture(42, 1)
    other_seed = generate_fixture(43, 0)
    assert not np.array_equal(base["tokens"], other_index["tokens"])
    assert not np.array_equal(base["tokens"], other_seed["tokens"])


def test_fixture_attention_rows_are_distributions():
    fx = generate_fixture(7, 0)
    attn = fx["attn"]
    assert attn.shape == (2, 197, 197)
    assert (attn > 0).all()
    sums = attn.sum(axis=2)
    assert np.abs(sums - 1.0).max() < 1e-12


def test_fixture_annotation_box_spans_whole_patches():
    fx = generate_fixture(11, 5)
    ann = fx["annotation"]
    (box,) = ann.gt_boxes
    assert 0 <= box.x0 < box.x1 <= ann.image_width
    assert 0 <= box.y0 < box.y1 <= ann.image_height
    for v in box.astuple():
        assert v % 16 == 0  # 224 / 14
    assert 5 * 16 <= box.x1 - box.x0 <= 9 * 16
    assert 5 * 16 <= box.y1 - box.y0 <= 9 * 16


def test_fixture_tokens_argmax_matches_planted_label():
    fx = generate_fixture(3, 2, grid=(14, 14), image_size=(224, 224))
    tokens = fx["tokens"]
    label = fx["label"]
    (box,) = fx["annotation"].gt_boxes
    inside = np.zeros((14, 14), dtype=bool)
    inside[box.y0 // 16 : box.y1 // 16, box.x0 // 16 : box.x1 // 16] = True
    flat = inside.reshape(-1)
    assert (tokens[flat].argmax(axis=1) == label).all()
    assert (tokens[~flat, label] < 1.0).all()  # no planted signal outside


def test_fixture_attention_mass_concentrates_inside():
    fx = generate_fixture(19, 4)
    (box,) = fx["annotation"].gt_boxes
    inside = np.zeros((14, 14), dtype=bool)
    inside[box.y0 // 16 : box.y1 // 16, box.x0 // 16 : box.x1 // 16] = True
    cls_map = assemble_attention(AttentionStack(layers=fx["attn"], grid=(14, 14)))
    assert cls_map[inside].min() > cls_map[~inside].max()


def test_fixture_validation():
    with pytest.raises(ArgumentError):
        generate_fixture(0, 0, grid=(14, 14), image_size=(225, 224))
    with pytest.raises(ArgumentError):
        generate_fixture(0, 0, classes=1)
    with pytest.raises(ArgumentError):
        generate_fixture(0, 0, grid=(6, 14), image_size=(84, 224))


def test_write_dataset_layout_and_determinism(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    ids = write_dataset(out_a, 3, seed=9)
    assert ids == ["synth000", "synth001", "synth002"]
    write_dataset(out_b, 3, seed=9)
    names = sorted(p.name for p in out_a.iterdir())
    assert names == [
        "annotations.jsonl",
        "head.bias.scmt",
        "head.kernel.scmt",
        "synth000.attn.scmt",
        "synth000.tokens.scmt",
        "synth001.attn.scmt",
        "synth001.tokens.scmt",
        "synth002.attn.scmt",
        "synth002.tokens.scmt",
    ]
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_write_dataset_files_load_through_adapter(tmp_path):
    write_dataset(tmp_path, 1, seed=21, classes=5)
    stack = load_stack(tmp_path, "synth000", (14, 14))
    assert stack.layers.shape == (2, 197, 197)
    tokens = read_tensor(tmp_path / "synth000.tokens.scmt").to_array()
    assert tokens.shape == (196, 5)
    anns = read_annotations(tmp_path / "annotations.jsonl")
    assert len(anns) == 1 and anns[0].image_id == "synth000"
    assert anns[0].class_label in range(5)


def test_write_dataset_count_validation(tmp_path):
    with pytest.raises(ArgumentError):
        write_dataset(tmp_path, 0, seed=1)
