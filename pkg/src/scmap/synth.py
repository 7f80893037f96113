"""Deterministic synthetic fixtures: a planted rectangle in the attention
rows plus per-patch semantics that agree with it, written in the same file
layout a real backbone export uses. Everything derives from (seed, index)
through numpy's seed-sequence mechanism, so a dataset is reproducible
byte for byte.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ArgumentError
from .metrics import BBox
from .tensor_store import Annotation, Tensor, write_annotations, write_tensor


def delta_head(channels: int) -> tuple[np.ndarray, np.ndarray]:
    """3x3 head whose only tap is the identity at the center: the semantic
    map equals the token grid, which keeps fixtures easy to reason about."""
    kernel = np.zeros((3, 3, channels, channels), dtype=np.float64)
    for c in range(channels):
        kernel[1, 1, c, c] = 1.0
    return kernel, np.zeros(channels)


def generate_fixture(
    seed: int,
    index: int,
    grid: tuple[int, int] = (14, 14),
    image_size: tuple[int, int] = (224, 224),
    classes: int = 8,
    attn_layers: int = 2,
) -> dict:
    """Build one synthetic image fixture.

    Returns a dict with keys: image_id, attn (I, N+1, N+1), tokens (N, C),
    annotation, label. The planted rectangle spans whole patches, so the
    ground-truth pixel box is the patch box scaled by the patch size.
    """
    gh, gw = grid
    img_h, img_w = image_size
    if img_h % gh or img_w % gw:
        raise ArgumentError(f"image size {image_size} not divisible by grid {grid}")
    if classes < 2:
        raise ArgumentError("need at least 2 classes")
    if not (gh >= 7 and gw >= 7):
        raise ArgumentError("grid must be at least 7x7 to fit a planted rectangle")
    rng = np.random.default_rng([seed, index])
    n = gh * gw

    rect_w = int(rng.integers(5, min(10, gw)))
    rect_h = int(rng.integers(5, min(10, gh)))
    rect_x = int(rng.integers(0, gw - rect_w + 1))
    rect_y = int(rng.integers(0, gh - rect_h + 1))
    label = int(rng.integers(classes))
    bg_class = (label + 1) % classes

    inside = np.zeros((gh, gw), dtype=bool)
    inside[rect_y : rect_y + rect_h, rect_x : rect_x + rect_w] = True
    inside_flat = inside.reshape(-1)

    # tokens: small positive noise everywhere, a strong planted channel inside
    # the rectangle, a mild distractor channel outside. Per-patch jitter keeps
    # same-group tokens non-parallel (pairwise cosine strictly below 1).
    tokens = 0.05 + 0.10 * rng.random((n, classes))
    tokens[inside_flat, label] = 6.0 + 0.5 * rng.random(int(inside_flat.sum()))
    tokens[~inside_flat, bg_class] = 0.5 + 0.1 * rng.random(int((~inside_flat).sum()))

    # attention: CLS row prefers planted patches; other rows are uniform.
    attn = np.full((attn_layers, n + 1, n + 1), 1.0 / (n + 1))
    for layer in range(attn_layers):
        row = np.ones(n + 1)
        row[0] = 0.5
        row[1:][inside_flat] = 4.0 + rng.random(int(inside_flat.sum()))
        attn[layer, 0, :] = row / row.sum()

    px_h = img_h // gh
    px_w = img_w // gw
    box = BBox(rect_x * px_w, rect_y * px_h, (rect_x + rect_w) * px_w, (rect_y + rect_h) * px_h)
    annotation = Annotation(
        image_id=f"synth{index:03d}",
        image_width=img_w,
        image_height=img_h,
        class_label=label,
        gt_boxes=(box,),
    )
    return {
        "image_id": annotation.image_id,
        "attn": attn,
        "tokens": tokens,
        "annotation": annotation,
        "label": label,
    }


def write_dataset(
    out_dir,
    count: int,
    seed: int,
    grid: tuple[int, int] = (14, 14),
    image_size: tuple[int, int] = (224, 224),
    classes: int = 8,
    attn_layers: int = 2,
) -> list[str]:
    """Write `count` fixtures plus the shared head and annotations.jsonl.

    Layout matches what the backbone adapter expects; returns the image ids
    in order. Same arguments -> byte-identical files.
    """
    if count < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    os.makedirs(out_dir, exist_ok=True)
    kernel, bias = delta_head(classes)
    write_tensor(os.path.join(out_dir, "head.kernel.scmt"), Tensor.from_array(kernel))
    write_tensor(os.path.join(out_dir, "head.bias.scmt"), Tensor.from_array(bias))
    ids = []
    annotations = []
    for index in range(count):
        fx = generate_fixture(seed, index, grid, image_size, classes, attn_layers)
        image_id = fx["image_id"]
        write_tensor(
            os.path.join(out_dir, f"{image_id}.attn.scmt"), Tensor.from_array(fx["attn"])
        )
        write_tensor(
            os.path.join(out_dir, f"{image_id}.tokens.scmt"), Tensor.from_array(fx["tokens"])
        )
        annotations.append(fx["annotation"])
        ids.append(image_id)
    write_annotations(os.path.join(out_dir, "annotations.jsonl"), annotations)
    return ids
