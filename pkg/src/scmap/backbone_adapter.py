"""Turns raw backbone exports into the two grid-shaped inputs the calibration
stack consumes: a class-attention map and a per-patch semantic map.

Expected tensor files in an export directory:

    <image_id>.attn.scmt     I x (N+1) x (N+1)  per-layer attention, CLS first
    <image_id>.tokens.scmt   N x Din            last-layer patch tokens
    head.kernel.scmt         3 x 3 x Din x C    semantic conv head weights
    head.bias.scmt           C                  semantic conv head bias

with N = grid_h * grid_w patches in row-major order after the CLS slot.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .tensor_store import read_tensor


@dataclass(frozen=True, eq=False)
class AttentionStack:
    """Per-layer token-to-token attention with a leading CLS slot.

    layers has shape (num_layers, N+1, N+1); each row is a distribution over
    source tokens. grid fixes how the N patch slots map onto (rows, cols).
    """

    layers: np.ndarray
    grid: tuple[int, int]

    def __post_init__(self):
        a = self.layers
        h, w = self.grid
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ShapeError(f"attention stack must be I x M x M, got {a.shape}")
        if a.shape[1] != h * w + 1:
            raise ShapeError(
                f"attention size {a.shape[1]} does not match grid {h}x{w} (+1 CLS)"
            )
        if a.shape[0] < 1:
            raise ShapeError("attention stack needs at least one layer")
        if not np.isfinite(a).all():
            raise ValidationError("attention stack contains non-finite values")


@dataclass(frozen=True, eq=False)
class TokenGrid:
    """Last-layer patch tokens, one row per patch, row-major over the grid."""

    tokens: np.ndarray
    grid: tuple[int, int]

    def __post_init__(self):
        h, w = self.grid
        if self.tokens.ndim != 2 or self.tokens.shape[0] != h * w:
            raise ShapeError(
                f"tokens must be ({h * w}, Din) for grid {h}x{w}, got {self.tokens.shape}"
            )


@dataclass(frozen=True, eq=False)
class SemanticHead:
    """3x3 conv classifier head: kernel (3, 3, Din, C) and bias (C,)."""

    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        k, b = self.kernel, self.bias
        if k.ndim != 4 or k.shape[0] != 3 or k.shape[1] != 3:
            raise ShapeError(f"kernel must be (3, 3, Din, C), got {k.shape}")
        if b.ndim != 1 or b.shape[0] != k.shape[3]:
            raise ShapeError(f"bias shape {b.shape} does not match C={k.shape[3]}")


def assemble_attention(stack: AttentionStack) -> np.ndarray:
    """Mean CLS-query attention over patches, reshaped to the grid.

    For each layer: take row 0 (CLS as query), drop column 0 (the CLS->CLS
    entry), keep columns 1..N in order without renormalizing. Average the
    layers and reshape row-major to (grid_h, grid_w). Output is float64.
    """
    h, w = stack.grid
    rows = np.asarray(stack.layers, dtype=np.float64)[:, 0, 1:]
    return rows.mean(axis=0).reshape(h, w)


def apply_semantic_head(tokens: TokenGrid, head: SemanticHead) -> np.ndarray:
    """Run the 3x3 conv head over the token grid.

    Tokens are laid out as an (H, W, Din) image, zero-padded by one patch on
    every side, convolved at stride 1, and offset by the per-channel bias.
    Returns float64 (H, W, C). Deterministic: plain shifted matmuls, no FFT.
    """
    h, w = tokens.grid
    din = tokens.tokens.shape[1]
    if head.kernel.shape[2] != din:
        raise ShapeError(
            f"head expects Din={head.kernel.shape[2]}, tokens have Din={din}"
        )
    grid = np.asarray(tokens.tokens, dtype=np.float64).reshape(h, w, din)
    padded = np.zeros((h + 2, w + 2, din))
    padded[1:-1, 1:-1] = grid
    kernel = np.asarray(head.kernel, dtype=np.float64)
    out = np.zeros((h, w, kernel.shape[3]))
    for dy in range(3):
        for dx in range(3):
            out += padded[dy : dy + h, dx : dx + w] @ kernel[dy, dx]
    return out + np.asarray(head.bias, dtype=np.float64)


def load_stack(tensor_dir, image_id: str, grid: tuple[int, int]) -> AttentionStack:
    t = read_tensor(os.path.join(tensor_dir, f"{image_id}.attn.scmt"))
    if t.rank != 3:
        raise ShapeError(f"{image_id}.attn.scmt: expected rank 3, got {t.rank}")
    return AttentionStack(layers=t.to_array(), grid=grid)


def load_tokens(tensor_dir, image_id: str, grid: tuple[int, int]) -> TokenGrid:
    t = read_tensor(os.path.join(tensor_dir, f"{image_id}.tokens.scmt"))
    if t.rank != 2:
        raise ShapeError(f"{image_id}.tokens.scmt: expected rank 2, got {t.rank}")
    return TokenGrid(tokens=t.to_array(), grid=grid)


def load_head(tensor_dir) -> SemanticHead:
    kernel = read_tensor(os.path.join(tensor_dir, "head.kernel.scmt"))
    bias = read_tensor(os.path.join(tensor_dir, "head.bias.scmt"))
    if kernel.rank != 4:
        raise ShapeError(f"head.kernel.scmt: expected rank 4, got {kernel.rank}")
    if bias.rank != 1:
        raise ShapeError(f"head.bias.scmt: expected rank 1, got {bias.rank}")
    return SemanticHead(kernel=kernel.to_array(), bias=bias.to_array())
