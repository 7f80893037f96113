"""Regression checks against the frozen calibration traces.

The golden files under tests/data/golden/ hold full per-level traces
computed by an independent recomputation path (see scripts/make_golden.py).
Here the production stack runs on freshly regenerated fixture inputs and
must land within float32 storage precision of the frozen values.

The "stress" set is the one with discriminating power: its configuration
moves the maps by O(1e-2) per layer.  The "default" set pins the
near-identity behavior of the library defaults on these fixtures.
"""

import json
import os
import tempfile

import numpy as np
import pytest

from scmap.backbone_adapter import (
    apply_semantic_head,
    assemble_attention,
    load_head,
    load_stack,
    load_tokens,
)
from scmap.diffusion import DiffusionParams, stack_forward
from scmap.patch_graph import build_grid_graph
from scmap.synth import write_dataset
from scmap.tensor_store import read_tensor

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "data", "golden")

# float32 storage quantization dominates; generation cross-check is far tighter
READ_RTOL = 1e-6


def _manifest():
    with open(os.path.join(GOLDEN_DIR, "golden_manifest.json"), encoding="utf-8") as fh:
        return json.load(fh)


def _params_from(entry):
    return DiffusionParams(
        num_layers=entry["layers"],
        lam=tuple(entry["lambda"]),
        beta=tuple(entry["beta"]),
        alpha=entry["alpha"],
        laplacian_sign=entry["sign"],
        iterations=entry["iterations"],
    )


def _rel_err(a, b):
    scale = max(np.abs(b).max(), 1e-300)
    return np.abs(a - b).max() / scale


@pytest.fixture(scope="module")
def manifest():
    return _manifest()


@pytest.mark.parametrize("set_name", ["stress", "default"])
def test_production_matches_frozen_trace(manifest, set_name):
    entry = manifest["sets"][set_name]
    grid = tuple(entry["grid"])
    params = _params_from(entry)
    graph = build_grid_graph(*grid)
    set_dir = os.path.join(GOLDEN_DIR, set_name)

    with tempfile.TemporaryDirectory() as inputs:
        ids = write_dataset(
            inputs,
            manifest["count"],
            manifest["seed"],
            grid=grid,
            image_size=tuple(manifest["image_size"]),
            classes=manifest["classes"],
            attn_layers=manifest["attn_layers"],
        )
        head = load_head(inputs)
        for image_id in ids:
            attn0 = assemble_attention(load_stack(inputs, image_id, grid))
            sem0 = apply_semantic_head(load_tokens(inputs, image_id, grid), head)
            trace = stack_forward(attn0, sem0, params, graph)

            attn_gold = read_tensor(os.path.join(set_dir, f"{image_id}.attn.trace.scmt")).to_array()
            sem_gold = read_tensor(os.path.join(set_dir, f"{image_id}.sem.trace.scmt")).to_array()
            assert attn_gold.shape == (params.num_layers + 1, *grid)
            assert sem_gold.shape[0] == params.num_layers + 1

            for level, (attn, sem) in enumerate(trace):
                assert _rel_err(attn, attn_gold[level]) <= READ_RTOL, (image_id, level, "attn")
                assert _rel_err(sem, sem_gold[level]) <= READ_RTOL, (image_id, level, "sem")


def test_stress_set_actually_moves_the_maps(manifest):
    # guard against re-freezing a degenerate identity trace
    entry = manifest["sets"]["stress"]
    set_dir = os.path.join(GOLDEN_DIR, "stress")
    moved = 0.0
    for image_id in [f"synth{i:03d}" for i in range(manifest["count"])]:
        gold = read_tensor(os.path.join(set_dir, f"{image_id}.attn.trace.scmt")).to_array()
        moved = max(moved, _rel_err(gold[-1], gold[0]))
    assert moved > 1e-3


def test_generation_cross_check_was_within_gate(manifest):
    for name, entry in manifest["sets"].items():
        assert entry["cross_check_worst"] <= entry["cross_check_gate"], name


def test_frozen_files_all_present(manifest):
    for name, entry in manifest["sets"].items():
        listed = sorted(entry["files"])
        on_disk = sorted(f for f in os.listdir(os.path.join(GOLDEN_DIR, name)))
        assert listed == on_disk
        assert len(listed) == 2 * manifest["count"]
