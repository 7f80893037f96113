"""Export orchestration and the manifest/cross-check plumbing.

An export directory is directly consumable by the primary engine's CLI:
``<id>.attn.scmt`` (I x (N+1) x (N+1), head-averaged), ``<id>.tokens.scmt``
(N x Din), ``head.kernel.scmt`` / ``head.bias.scmt``, ``annotations.jsonl``,
plus ``manifest.jsonl`` describing the model, preprocessing, and per-file
shapes and checksums.

`cross_check` re-reads every listed tensor through the primary package's
reader and compares shape and checksum, which is the compatibility gate
between this package's writer and the engine's format.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from scmap.tensor_store import read_tensor

from .errors import ExportValidationError, UnsupportedArchitectureError
from .model import MiniViT, load_model, seeded_head
from .preprocess import CROP, preprocess_image, preprocess_record
from .writer import sha256_file, write_scmt

_IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".gif")


def export_image(image, model: MiniViT, out_dir, image_id: str) -> dict:
    """Run one image through the backbone and write its two tensor files.

    Returns the manifest record (file names, shapes, sha256 digests).
    """
    if not model.has_cls:
        raise UnsupportedArchitectureError(
            f"model '{model.name}' has no CLS token; its attention cannot seed a class map"
        )
    x = torch.from_numpy(preprocess_image(image)).unsqueeze(0)
    with torch.no_grad():
        tokens, attns = model(x)
    attn_stack = torch.stack([a[0] for a in attns]).numpy().astype(np.float32)
    patch_tokens = tokens[0, 1:, :].numpy().astype(np.float32)

    files = {"attn": f"{image_id}.attn.scmt", "tokens": f"{image_id}.tokens.scmt"}
    digests = {
        "attn": write_scmt(os.path.join(out_dir, files["attn"]), attn_stack),
        "tokens": write_scmt(os.path.join(out_dir, files["tokens"]), patch_tokens),
    }
    return {
        "kind": "image",
        "image_id": image_id,
        "files": files,
        "shapes": {"attn": list(attn_stack.shape), "tokens": list(patch_tokens.shape)},
        "sha256": digests,
    }


def export_head(kernel, bias, out_dir) -> dict:
    """Write the 3x3 conv head; validates kernel (3, 3, Din, C) and bias (C,)."""
    k = np.asarray(kernel, dtype=np.float32)
    b = np.asarray(bias, dtype=np.float32)
    if k.ndim != 4 or k.shape[:2] != (3, 3):
        raise ExportValidationError(f"head kernel must be (3, 3, Din, C), got {k.shape}")
    if b.ndim != 1 or b.shape[0] != k.shape[3]:
        raise ExportValidationError(
            f"head bias shape {b.shape} does not match C={k.shape[3]}"
        )
    files = {"kernel": "head.kernel.scmt", "bias": "head.bias.scmt"}
    digests = {
        "kernel": write_scmt(os.path.join(out_dir, files["kernel"]), k),
        "bias": write_scmt(os.path.join(out_dir, files["bias"]), b),
    }
    return {
        "kind": "head",
        "files": files,
        "shapes": {"kernel": list(k.shape), "bias": list(b.shape)},
        "sha256": digests,
    }


def _discover_images(image_dir) -> list[tuple[str, str]]:
    try:
        names = sorted(os.listdir(image_dir))
    except OSError as exc:
        raise ExportValidationError(f"cannot list image dir {image_dir}: {exc}") from exc
    out = []
    seen = set()
    for name in names:
        stem, ext = os.path.splitext(name)
        if ext.lower() not in _IMAGE_EXTENSIONS:
            continue
        if stem in seen:
            raise ExportValidationError(f"duplicate image id '{stem}' in {image_dir}")
        seen.add(stem)
        out.append((stem, os.path.join(image_dir, name)))
    return out


def export_dataset(
    image_dir,
    out_dir,
    model_name: str = "mini-vit",
    seed: int = 0,
    classes: int = 8,
) -> str:
    """Export every image in `image_dir`; returns the manifest path.

    Annotations are placeholders (label 0, full-frame box in the 224x224
    preprocessed frame) so the engine's prediction pipeline can run on real
    images that carry no ground truth.
    """
    model = load_model(model_name, seed)
    images = _discover_images(image_dir)
    os.makedirs(out_dir, exist_ok=True)

    records = [
        {
            "kind": "export",
            "model": model.name,
            "weights": "untrained-seeded",
            "seed": seed,
            "grid": list(model.grid),
            "layers": len(model.blocks),
            "classes": classes,
            "preprocess": preprocess_record(),
            "annotations": "placeholder-fullframe",
            "images": [image_id for image_id, _ in images],
        }
    ]
    kernel, bias = seeded_head(model.embed_dim, classes, seed)
    records.append(export_head(kernel, bias, out_dir))
    for image_id, path in images:
        records.append(export_image(path, model, out_dir, image_id))

    w, h = CROP
    with open(os.path.join(out_dir, "annotations.jsonl"), "w", encoding="utf-8") as fh:
        for image_id, _ in images:
            fh.write(
                json.dumps(
                    {
                        "image_id": image_id,
                        "width": w,
                        "height": h,
                        "label": 0,
                        "boxes": [[0, 0, w, h]],
                    }
                )
                + "\n"
            )

    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return manifest_path


@dataclass
class CheckReport:
    """Per-file pass/fail from re-reading an export through the primary reader."""

    results: list[tuple[str, bool, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.results)

    def render(self) -> str:
        lines = [
            f"{'ok' if ok else 'FAIL':4} {name}  {detail}" for name, ok, detail in self.results
        ]
        verdict = "all files pass" if self.passed else "FAILURES present"
        count = len(self.results)
        return "\n".join(lines + [f"{count} files checked; {verdict}"])


def cross_check(manifest_path) -> CheckReport:
    """Validate every tensor listed in a manifest: shape and checksum.

    Files are read through the primary package's reader, so a pass means the
    export is genuinely consumable by the engine. An empty manifest passes
    vacuously.
    """
    base = os.path.dirname(os.path.abspath(manifest_path))
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
    except OSError as exc:
        raise ExportValidationError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ExportValidationError(f"manifest {manifest_path} is not JSONL: {exc}") from exc

    report = CheckReport()
    for record in records:
        for key, name in record.get("files", {}).items():
            path = os.path.join(base, name)
            want_shape = tuple(record["shapes"][key])
            want_digest = record["sha256"][key]
            try:
                tensor = read_tensor(path)
            except Exception as exc:
                report.results.append((name, False, f"unreadable: {exc}"))
                continue
            if tensor.dims != want_shape:
                report.results.append(
                    (name, False, f"shape {tensor.dims} != manifest {want_shape}")
                )
                continue
            digest = sha256_file(path)
            if digest != want_digest:
                report.results.append((name, False, "checksum mismatch"))
                continue
            report.results.append((name, True, f"shape {tensor.dims}"))
    return report
