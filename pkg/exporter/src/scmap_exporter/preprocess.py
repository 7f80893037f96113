"""Deterministic image preprocessing: 256x256 bilinear resize, 224 center
crop, per-channel mean/std normalization. The exact constants are recorded
in every export manifest so downstream runs can reproduce the pixels."""

from __future__ import annotations

import numpy as np
from PIL import Image

RESIZE = (256, 256)
CROP = (224, 224)
MEAN = (0.485, 0.456, 0.406)
STD = (0.229, 0.224, 0.225)


def preprocess_image(image) -> np.ndarray:
    """Path or PIL image -> float32 (3, 224, 224), normalized.

    Grayscale (or palette/alpha) inputs are converted to 3-channel RGB first.
    """
    img = image if isinstance(image, Image.Image) else Image.open(image)
    img = img.convert("RGB")
    img = img.resize(RESIZE, Image.BILINEAR)
    left = (RESIZE[0] - CROP[0]) // 2
    top = (RESIZE[1] - CROP[1]) // 2
    img = img.crop((left, top, left + CROP[0], top + CROP[1]))
    arr = np.asarray(img, dtype=np.float32) / 255.0  # (h, w, 3)
    arr = (arr - np.array(MEAN, dtype=np.float32)) / np.array(STD, dtype=np.float32)
    return arr.transpose(2, 0, 1).copy()


def preprocess_record() -> dict:
    """Manifest entry describing exactly what `preprocess_image` does."""
    return {
        "resize": list(RESIZE),
        "interpolation": "bilinear",
        "crop": list(CROP),
        "crop_mode": "center",
        "mean": list(MEAN),
        "std": list(STD),
    }
