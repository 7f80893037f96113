"""Forward-mode derivative checks for the calibration stack's scalars.

The stack is trained through its per-layer lam and beta values, so those
must be differentiable end to end, through the cosine similarity, the
approximate-inverse recursion, the soft shrink, and the residual updates.
This module carries a (value, derivative) pair through a mirror of the
forward pass — one parameter per run — and cross-checks against central
finite differences over the production path.

The mirror intentionally repeats the math of `diffusion` instead of calling
it: the production code stays free of dual types, and disagreement between
the two paths is a real signal rather than a shared bug.
"""

from __future__ import annotations

import numpy as np

from .diffusion import DiffusionParams, gap_logits, stack_forward
from .errors import ArgumentError, ShapeError
from .patch_graph import PatchGraph

_TARGETS = ("lambda", "beta")


class Dual:
    """value + derivative pair over ndarrays; broadcasting follows numpy."""

    __slots__ = ("val", "dot")

    def __init__(self, val, dot=0.0):
        self.val = np.asarray(val, dtype=np.float64)
        self.dot = np.asarray(dot, dtype=np.float64)

    @staticmethod
    def lift(other) -> "Dual":
        return other if isinstance(other, Dual) else Dual(other, 0.0)

    def __add__(self, other):
        o = Dual.lift(other)
        return Dual(self.val + o.val, self.dot + o.dot)

    __radd__ = __add__

    def __sub__(self, other):
        o = Dual.lift(other)
        return Dual(self.val - o.val, self.dot - o.dot)

    def __rsub__(self, other):
        o = Dual.lift(other)
        return Dual(o.val - self.val, o.dot - self.dot)

    def __mul__(self, other):
        o = Dual.lift(other)
        return Dual(self.val * o.val, self.dot * o.val + self.val * o.dot)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Dual.lift(other)
        return Dual(
            self.val / o.val,
            (self.dot * o.val - self.val * o.dot) / (o.val * o.val),
        )

    def __rtruediv__(self, other):
        return Dual.lift(other).__truediv__(self)

    def __matmul__(self, other):
        o = Dual.lift(other)
        return Dual(self.val @ o.val, self.dot @ o.val + self.val @ o.dot)

    def __rmatmul__(self, other):
        return Dual.lift(other).__matmul__(self)

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    @property
    def T(self):
        return Dual(self.val.T, self.dot.T)

    def reshape(self, *shape):
        return Dual(self.val.reshape(*shape), self.dot.reshape(*shape))

    def mean(self, axis=None):
        return Dual(self.val.mean(axis=axis), self.dot.mean(axis=axis))


def dual_tanh(x: Dual) -> Dual:
    t = np.tanh(x.val)
    return Dual(t, x.dot * (1.0 - t * t))


def _dual_similarity(sem: Dual) -> Dual:
    n = sem.val.shape[0] * sem.val.shape[1]
    v = sem.reshape(n, sem.val.shape[2])
    gram = v @ v.T
    sq_val = np.diagonal(gram.val).copy()
    sq_dot = np.diagonal(gram.dot).copy()
    denom_val_sq = np.outer(sq_val, sq_val)
    denom_dot_sq = sq_dot[:, None] * sq_val[None, :] + sq_val[:, None] * sq_dot[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        denom_val = np.sqrt(denom_val_sq)
        denom_dot = denom_dot_sq / (2.0 * denom_val)
        sim_val = gram.val / denom_val
        sim_dot = (gram.dot * denom_val - gram.val * denom_dot) / (denom_val * denom_val)
    dead = denom_val == 0.0
    sim_val[dead] = 0.0
    sim_dot[dead] = 0.0
    # clip is inactive except at exact extremes, where the path is stationary
    over = np.abs(sim_val) > 1.0
    sim_val = np.clip(sim_val, -1.0, 1.0)
    sim_dot[over] = 0.0
    return Dual(sim_val, sim_dot)


def _dual_block(attn: Dual, sem: Dual, graph: PatchGraph, params: DiffusionParams,
                lam: Dual, beta: Dual) -> tuple[Dual, Dual]:
    da = graph.laplacian_dense()
    sim = _dual_similarity(sem)
    if params.laplacian_sign == "main":
        factor = lam * sim - 1.0
    else:
        factor = 1.0 - lam * sim
    lap = Dual(da, 0.0) * factor

    x = Dual(params.alpha * lap.val.T, params.alpha * lap.dot.T)
    eye2 = 2.0 * np.eye(graph.num_nodes)
    for _ in range(params.iterations):
        x = x @ (Dual(eye2, 0.0) - lap @ x)

    flat = attn.reshape(graph.num_nodes)
    diffused = (x @ flat).reshape(graph.height, graph.width)

    if params.filter_input == "diffused":
        update = diffused - beta * dual_tanh(diffused / beta)
        gate = update
    else:
        update = diffused
        gate = attn - beta * dual_tanh(attn / beta)

    attn_out = attn + update if params.residual_attn else update
    gate_col = gate.reshape(graph.height, graph.width, 1)
    sem_out = sem * (gate_col + 1.0) if params.residual_sem else sem * gate_col
    return attn_out, sem_out


def _check_target(params: DiffusionParams, target: str, layer: int) -> None:
    if target not in _TARGETS:
        raise ArgumentError(f"target must be one of {_TARGETS}, got {target!r}")
    count = len(params.lam if target == "lambda" else params.beta)
    if not 0 <= layer < count:
        raise ArgumentError(f"no {target} parameter at layer {layer} (have {count})")


def scalar_output(attn0, sem0, params: DiffusionParams, graph: PatchGraph,
                  class_idx: int = 0) -> float:
    """GAP logit of one class after the full production stack (a smooth
    scalar functional of everything upstream)."""
    trace = stack_forward(attn0, sem0, params, graph)
    logits = gap_logits(trace[-1][1])
    if not 0 <= class_idx < logits.shape[0]:
        raise ArgumentError(f"class index {class_idx} outside 0..{logits.shape[0] - 1}")
    return float(logits[class_idx])


def dual_sensitivity(attn0, sem0, params: DiffusionParams, graph: PatchGraph,
                     target: str, layer: int, class_idx: int = 0) -> float:
    """d scalar_output / d (target parameter at `layer`), forward mode.

    Parameters beyond num_layers exist but are unused; their derivative is
    exactly 0 (the seed never enters the pipeline).
    """
    _check_target(params, target, layer)
    attn_val = np.asarray(attn0, dtype=np.float64)
    sem_val = np.asarray(sem0, dtype=np.float64)
    attn = Dual(attn_val, np.zeros_like(attn_val))
    sem = Dual(sem_val, np.zeros_like(sem_val))
    if sem.val.ndim != 3 or sem.val.shape[:2] != attn.val.shape:
        raise ShapeError(
            f"attention {attn.val.shape} and semantic {sem.val.shape} grids do not match"
        )
    for i in range(params.num_layers):
        lam = Dual(params.lam[i], 1.0 if (target == "lambda" and i == layer) else 0.0)
        beta = Dual(params.beta[i], 1.0 if (target == "beta" and i == layer) else 0.0)
        attn, sem = _dual_block(attn, sem, graph, params, lam, beta)
    logit = sem.mean(axis=(0, 1))
    if not 0 <= class_idx < logit.val.shape[0]:
        raise ArgumentError(f"class index {class_idx} outside 0..{logit.val.shape[0] - 1}")
    return float(np.asarray(logit.dot)[class_idx])


def finite_difference(attn0, sem0, params: DiffusionParams, graph: PatchGraph,
                      target: str, layer: int, h: float = 1e-5,
                      class_idx: int = 0) -> float:
    """Central difference of scalar_output over the production path.

    Raises ArgumentError if h <= 0 or if a perturbed parameter leaves its
    domain (beta must stay inside (0, 1))."""
    _check_target(params, target, layer)
    if h <= 0.0:
        raise ArgumentError(f"h must be positive, got {h}")
    base = params.lam[layer] if target == "lambda" else params.beta[layer]
    hi = params.with_layer_value(target, layer, base + h)
    lo = params.with_layer_value(target, layer, base - h)
    f_hi = scalar_output(attn0, sem0, hi, graph, class_idx)
    f_lo = scalar_output(attn0, sem0, lo, graph, class_idx)
    return (f_hi - f_lo) / (2.0 * h)


def gradcheck(attn0, sem0, params: DiffusionParams, graph: PatchGraph,
              h: float = 1e-5, tol: float = 1e-4, class_idx: int = 0):
    """Compare dual vs FD for every used parameter.

    Returns a list of (name, dual, fd, rel_err, ok); rel_err uses
    |dual - fd| / max(1e-12, |dual|)."""
    rows = []
    for target in _TARGETS:
        for layer in range(params.num_layers):
            d = dual_sensitivity(attn0, sem0, params, graph, target, layer, class_idx)
            f = finite_difference(attn0, sem0, params, graph, target, layer, h, class_idx)
            rel = abs(d - f) / max(1e-12, abs(d))
            rows.append((f"{target}[{layer}]", d, f, rel, rel <= tol))
    return rows
