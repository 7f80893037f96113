"""Calibration core: semantic-gated graph diffusion of a class-attention map.

One calibration layer does, in order:

1. cosine similarity between all patch-token pairs of the semantic map,
2. a similarity-weighted graph Laplacian on the 4-connected patch lattice,
3. an approximate inverse of that Laplacian via Newton-Schulz iteration,
4. diffusion of the attention map through the approximate inverse,
5. a soft shrink ``x - beta * tanh(x / beta)`` that damps small activations,
6. residual updates of both the attention map and the semantic map.

All math is float64; inputs are converted on entry. Matrices are plain
ndarrays: similarity is (N, N) with unit diagonal for nonzero tokens,
Laplacian-typed arrays are (N, N), maps are (H, W) or (H, W, C), N = H * W
row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ArgumentError, NumericError, ShapeError
from .patch_graph import PatchGraph, flatten, unflatten

_SIGNS = ("main", "appendix")
_FILTER_INPUTS = ("diffused", "raw")


@dataclass(frozen=True)
class DiffusionParams:
    """Per-run calibration settings.

    lam and beta are per-layer lists; they may be longer than num_layers, in
    which case the extra entries are ignored. laplacian_sign picks between
    the two published couplings (D-A)*(lam*E - 1) ("main") and its negation
    ("appendix"). filter_input chooses whether the soft shrink is applied to
    the diffused map (default) or to the raw input map, with the diffused map
    then used unfiltered for the attention update.
    """

    num_layers: int = 4
    lam: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    beta: tuple[float, ...] = (0.5, 0.5, 0.5, 0.5)
    alpha: float = 0.002
    iterations: int = 4
    laplacian_sign: str = "main"
    residual_attn: bool = True
    residual_sem: bool = True
    filter_input: str = "diffused"

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))
        if self.num_layers < 0:
            raise ArgumentError(f"num_layers must be >= 0, got {self.num_layers}")
        if len(self.lam) < self.num_layers:
            raise ArgumentError(
                f"need at least {self.num_layers} lam values, got {len(self.lam)}"
            )
        if len(self.beta) < self.num_layers:
            raise ArgumentError(
                f"need at least {self.num_layers} beta values, got {len(self.beta)}"
            )
        for b in self.beta[: self.num_layers]:
            if not 0.0 < b < 1.0:
                raise ArgumentError(f"beta must lie in (0, 1), got {b}")
        if self.alpha <= 0.0:
            raise ArgumentError(f"alpha must be positive, got {self.alpha}")
        if self.iterations < 0:
            raise ArgumentError(f"iterations must be >= 0, got {self.iterations}")
        if self.laplacian_sign not in _SIGNS:
            raise ArgumentError(f"laplacian_sign must be one of {_SIGNS}")
        if self.filter_input not in _FILTER_INPUTS:
            raise ArgumentError(f"filter_input must be one of {_FILTER_INPUTS}")

    def with_layer_value(self, target: str, layer: int, value: float) -> "DiffusionParams":
        """Copy with lam or beta at one layer replaced (used by sensitivity)."""
        if target not in ("lambda", "beta"):
            raise ArgumentError(f"target must be 'lambda' or 'beta', got {target!r}")
        key = "lam" if target == "lambda" else "beta"
        vals = list(getattr(self, key))
        if not 0 <= layer < len(vals):
            raise ArgumentError(f"layer {layer} outside 0..{len(vals) - 1}")
        vals[layer] = float(value)
        return replace(self, **{key: tuple(vals)})


def semantic_similarity(sem: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of patch tokens.

    sem is (H, W, C); patches are flattened row-major to N = H*W rows.
    Entries with a zero-norm operand are 0 (including that row's diagonal);
    all values are clipped to [-1, 1]. Identical nonzero tokens yield exactly
    1.0, which downstream code relies on for the degenerate cases.
    """
    s = np.asarray(sem, dtype=np.float64)
    if s.ndim != 3:
        raise ShapeError(f"semantic map must be (H, W, C), got {s.shape}")
    v = s.reshape(-1, s.shape[2])
    gram = v @ v.T
    sq = np.diagonal(gram).copy()
    denom = np.sqrt(np.outer(sq, sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = gram / denom
    sim[denom == 0.0] = 0.0
    np.clip(sim, -1.0, 1.0, out=sim)
    return sim


def build_laplacian(
    graph: PatchGraph, similarity: np.ndarray, lam: float, sign: str = "main"
) -> np.ndarray:
    """Semantic-weighted Laplacian: (D - A) entrywise-scaled by the coupling.

    sign="main" uses (lam * E - 1); sign="appendix" uses (1 - lam * E).
    With lam = 1 and similarity identically 1 the result is exactly zero.
    """
    if sign not in _SIGNS:
        raise ArgumentError(f"sign must be one of {_SIGNS}, got {sign!r}")
    n = graph.num_nodes
    e = np.asarray(similarity, dtype=np.float64)
    if e.shape != (n, n):
        raise ShapeError(f"similarity must be ({n}, {n}), got {e.shape}")
    factor = lam * e - 1.0 if sign == "main" else 1.0 - lam * e
    return graph.laplacian_dense() * factor


def newton_schulz(lap: np.ndarray, alpha: float, iterations: int) -> np.ndarray:
    """Approximate inverse by the quadratic iteration.

    X_0 = alpha * lap^T, then X <- X (2 I - lap X), `iterations` times.
    Converges when the initial residual has spectral radius below 1 (e.g.
    alpha <= 1 / (||lap||_1 * ||lap||_inf)); with the small default alpha and
    few iterations it behaves as a scaled smoother rather than a full solve.
    """
    mat = np.asarray(lap, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ShapeError(f"laplacian must be square, got {mat.shape}")
    if alpha <= 0.0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    if iterations < 0:
        raise ArgumentError(f"iterations must be >= 0, got {iterations}")
    x = alpha * mat.T
    eye = np.eye(mat.shape[0])
    # overflow surfaces as the explicit divergence error below, not a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iterations):
            x = x @ (2.0 * eye - mat @ x)
    if not np.isfinite(x).all():
        raise NumericError(
            "newton_schulz diverged (non-finite iterate); alpha too large for this matrix"
        )
    return x


def diffuse(attn_map: np.ndarray, x: np.ndarray, graph: PatchGraph) -> np.ndarray:
    """Propagate a grid map through an (N, N) operator: unflatten(X @ flatten(map))."""
    m = np.asarray(attn_map, dtype=np.float64)
    if m.shape != (graph.height, graph.width):
        raise ShapeError(
            f"map shape {m.shape} does not match grid {graph.height}x{graph.width}"
        )
    n = graph.num_nodes
    if x.shape != (n, n):
        raise ShapeError(f"operator must be ({n}, {n}), got {x.shape}")
    return unflatten(x @ flatten(m), graph.height, graph.width)


def dynamic_filter(m: np.ndarray, beta: float) -> np.ndarray:
    """Soft shrink x - beta * tanh(x / beta).

    Odd, zero-preserving, and |output| <= |input|; values far above beta pass
    nearly unchanged (shifted by ~beta), values near zero are damped to
    ~x^3 / (3 beta^2).
    """
    if not 0.0 < beta < 1.0:
        raise ArgumentError(f"beta must lie in (0, 1), got {beta}")
    arr = np.asarray(m, dtype=np.float64)
    return arr - beta * np.tanh(arr / beta)


def block_forward(
    attn: np.ndarray,
    sem: np.ndarray,
    params: DiffusionParams,
    graph: PatchGraph,
    layer: int,
) -> tuple[np.ndarray, np.ndarray]:
    """One calibration layer; returns the updated (attention, semantic) maps."""
    if not 0 <= layer < params.num_layers:
        raise ArgumentError(f"layer {layer} outside 0..{params.num_layers - 1}")
    lam = params.lam[layer]
    beta = params.beta[layer]

    sim = semantic_similarity(sem)
    lap = build_laplacian(graph, sim, lam, params.laplacian_sign)
    x = newton_schulz(lap, params.alpha, params.iterations)
    diffused = diffuse(attn, x, graph)

    if params.filter_input == "diffused":
        update = dynamic_filter(diffused, beta)
        gate = update
    else:
        update = diffused
        gate = dynamic_filter(np.asarray(attn, dtype=np.float64), beta)

    attn_out = attn + update if params.residual_attn else update
    if params.residual_sem:
        sem_out = sem * (1.0 + gate)[:, :, None]
    else:
        sem_out = sem * gate[:, :, None]
    return attn_out, sem_out


def stack_forward(
    attn0: np.ndarray,
    sem0: np.ndarray,
    params: DiffusionParams,
    graph: PatchGraph,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Run all layers; returns the trace [(attn_0, sem_0), ..., (attn_L, sem_L)].

    Element 0 holds the float64-converted inputs; the list has
    params.num_layers + 1 entries.
    """
    attn = np.asarray(attn0, dtype=np.float64)
    sem = np.asarray(sem0, dtype=np.float64)
    if sem.shape[:2] != attn.shape:
        raise ShapeError(
            f"attention {attn.shape} and semantic {sem.shape} grids do not match"
        )
    trace = [(attn, sem)]
    for layer in range(params.num_layers):
        attn, sem = block_forward(attn, sem, params, graph, layer)
        trace.append((attn, sem))
    return trace


def gap_logits(sem: np.ndarray) -> np.ndarray:
    """Global average pool: per-channel spatial mean of an (H, W, C) map."""
    s = np.asarray(sem, dtype=np.float64)
    if s.ndim != 3:
        raise ShapeError(f"semantic map must be (H, W, C), got {s.shape}")
    return s.mean(axis=(0, 1))
