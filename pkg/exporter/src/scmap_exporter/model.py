"""A small vision transformer that exposes what the export needs: per-layer
softmax attention matrices (averaged over heads) and final token states.

No pretrained checkpoint ships with this package; `load_model` builds a
seeded, randomly initialized network, and manifests mark the weights as
untrained. Structure is the real thing: 16-pixel patch embedding, a CLS
token, learned position embeddings, pre-norm blocks, multi-head attention.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .errors import ExportValidationError

# single-threaded torch keeps exports byte-reproducible
torch.set_num_threads(1)


class _SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ExportValidationError(f"embed dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x):
        b, m, d = x.shape
        hd = d // self.heads
        qkv = self.qkv(x).reshape(b, m, 3, self.heads, hd).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        att = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(hd), dim=-1)
        out = (att @ v).transpose(1, 2).reshape(b, m, d)
        return self.proj(out), att.mean(dim=1)  # (b, m, d), (b, m, m) head-averaged


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = _SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim), nn.GELU(), nn.Linear(mlp_ratio * dim, dim)
        )

    def forward(self, x):
        y, att = self.attn(self.norm1(x))
        x = x + y
        x = x + self.mlp(self.norm2(x))
        return x, att


class MiniViT(nn.Module):
    """Patch-grid transformer returning (final tokens, per-layer attention)."""

    def __init__(
        self,
        name: str = "mini-vit",
        image_size: int = 224,
        patch_size: int = 16,
        embed_dim: int = 32,
        depth: int = 4,
        heads: int = 4,
        mlp_ratio: int = 2,
        cls_token: bool = True,
    ):
        super().__init__()
        if image_size % patch_size != 0:
            raise ExportValidationError(
                f"image size {image_size} not divisible by patch size {patch_size}"
            )
        self.name = name
        self.patch_size = patch_size
        self.grid = (image_size // patch_size, image_size // patch_size)
        self.embed_dim = embed_dim
        self.has_cls = cls_token
        n = self.grid[0] * self.grid[1]
        self.patch_embed = nn.Conv2d(3, embed_dim, kernel_size=patch_size, stride=patch_size)
        self.cls = nn.Parameter(torch.zeros(1, 1, embed_dim)) if cls_token else None
        self.pos = nn.Parameter(torch.randn(1, n + (1 if cls_token else 0), embed_dim) * 0.02)
        self.blocks = nn.ModuleList(_Block(embed_dim, heads, mlp_ratio) for _ in range(depth))
        self.norm = nn.LayerNorm(embed_dim)

    def forward(self, x):
        b = x.shape[0]
        t = self.patch_embed(x).flatten(2).transpose(1, 2)  # (b, n, d)
        if self.has_cls:
            t = torch.cat([self.cls.expand(b, -1, -1), t], dim=1)
        t = t + self.pos
        attns = []
        for block in self.blocks:
            t, att = block(t)
            attns.append(att)
        return self.norm(t), attns


_REGISTRY = {
    "mini-vit": dict(embed_dim=32, depth=4, heads=4, cls_token=True),
    "mini-vit-nocls": dict(embed_dim=32, depth=4, heads=4, cls_token=False),
}


def load_model(name: str = "mini-vit", seed: int = 0) -> MiniViT:
    """Build a seeded, untrained backbone from the registry.

    Same (name, seed) -> identical weights, hence byte-identical exports.
    """
    if name not in _REGISTRY:
        raise ExportValidationError(
            f"unknown model '{name}'; available: {', '.join(sorted(_REGISTRY))}"
        )
    torch.manual_seed(seed)
    model = MiniViT(name=name, **_REGISTRY[name])
    model.eval()
    return model


def seeded_head(din: int, classes: int, seed: int):
    """Random 3x3 conv head (kernel (3,3,Din,C), bias (C,)) as float32 numpy."""
    if classes < 1:
        raise ExportValidationError(f"classes must be >= 1, got {classes}")
    g = torch.Generator().manual_seed(seed)
    kernel = (torch.randn(3, 3, din, classes, generator=g) * 0.05).numpy().astype("float32")
    bias = (torch.randn(classes, generator=g) * 0.01).numpy().astype("float32")
    return kernel, bias
