"""Independent validation path for the diffusion math.

Treats the calibrated operator as the generator of a linear flow
di/dt = lap @ i + u(t) * source, integrates it with explicit Euler, and
provides a hand-rolled pivoted dense solve plus a convergent Newton-Schulz
inverse. None of this reuses the production smoother, so agreement between
the two paths is meaningful evidence.

Note the steady state of the ODE above is -lap^{-1} @ source (not the
positive-sign equilibrium sometimes quoted); tests assert the ODE-consistent
sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentError,
    ConvergenceError,
    InstabilityError,
    ShapeError,
    SingularMatrixError,
)

_OVERFLOW_GUARD = 1e12


@dataclass(frozen=True, eq=False)
class FlowState:
    """Flow vector over the N graph nodes at time t."""

    values: np.ndarray
    t: float


def _as_matrix(lap) -> np.ndarray:
    m = np.asarray(lap, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got {m.shape}")
    return m


def _as_source(source, n: int) -> np.ndarray:
    f = np.asarray(source, dtype=np.float64).reshape(-1)
    if f.size != n:
        raise ShapeError(f"source has {f.size} entries, matrix is {n}x{n}")
    return f


def simulate_flow(
    lap,
    source,
    dt: float,
    steps: int,
    input_rate=None,
    callback=None,
) -> FlowState:
    """Explicit Euler integration of di/dt = lap @ i + u(t) * source.

    Starts from i = 0 at t = 0. input_rate maps t -> u(t); None means the
    constant 1. callback, if given, is invoked as callback(step, t, i,
    residual) after every step with residual = ||lap @ i + u(t) * source||_inf.

    Raises InstabilityError naming the largest stable step estimate
    (2 / ||lap||_inf) if ||i||_inf passes the overflow guard.
    """
    m = _as_matrix(lap)
    f = _as_source(source, m.shape[0])
    if dt <= 0.0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    if steps < 1:
        raise ArgumentError(f"steps must be >= 1, got {steps}")
    u = input_rate if input_rate is not None else (lambda t: 1.0)

    i = np.zeros(m.shape[0])
    t = 0.0
    for k in range(steps):
        rate = m @ i + u(t) * f
        i = i + dt * rate
        t = (k + 1) * dt
        norm = np.abs(i).max() if i.size else 0.0
        if not np.isfinite(norm) or norm > _OVERFLOW_GUARD:
            row_scale = np.abs(m).sum(axis=1).max()
            dt_max = 2.0 / row_scale if row_scale > 0 else np.inf
            raise InstabilityError(
                f"flow diverged at step {k + 1} (||i|| = {norm:.3e}); "
                f"largest stable step is about {dt_max:.3e}"
            )
        if callback is not None:
            residual = np.abs(m @ i + u(t) * f).max()
            callback(k + 1, t, i, residual)
    return FlowState(values=i, t=t)


def exact_solve(lap, source) -> np.ndarray:
    """Solve lap @ x = flatten(source) by Gaussian elimination, partial pivoting.

    The pivot threshold is 1e-12 * max|lap|; falling below it raises
    SingularMatrixError. This is the reference solver the approximate
    smoother is judged against, so it deliberately shares no code with it.
    """
    m = _as_matrix(lap).copy()
    b = _as_source(source, m.shape[0]).copy()
    n = m.shape[0]
    scale = np.abs(m).max()
    threshold = 1e-12 * scale
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(m[col:, col])))
        pivot = m[pivot_row, col]
        if scale == 0.0 or abs(pivot) <= threshold:
            raise SingularMatrixError(
                f"pivot {abs(pivot):.3e} below threshold {threshold:.3e} at column {col}"
            )
        if pivot_row != col:
            m[[col, pivot_row]] = m[[pivot_row, col]]
            b[[col, pivot_row]] = b[[pivot_row, col]]
        factors = m[col + 1 :, col] / pivot
        m[col + 1 :, col:] -= factors[:, None] * m[col, col:]
        b[col + 1 :] -= factors * b[col]
    x = np.empty(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - m[row, row + 1 :] @ x[row + 1 :]) / m[row, row]
    return x


def converged_ns_inverse(lap, tol: float, max_p: int) -> tuple[np.ndarray, int]:
    """Newton-Schulz run to convergence with the provably safe scaling.

    Uses alpha = 1 / (||lap||_1 * ||lap||_inf), which bounds the initial
    residual's spectral radius below 1 for any invertible lap. Iterates
    X <- X (2I - lap X) until ||I - lap X||_max <= tol, returning
    (X, iterations_used). Raises ConvergenceError if max_p iterations are
    not enough (singular matrices plateau at residual >= 1).
    """
    m = _as_matrix(lap)
    if tol <= 0.0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    if max_p < 0:
        raise ArgumentError(f"max_p must be >= 0, got {max_p}")
    n = m.shape[0]
    norm_1 = np.abs(m).sum(axis=0).max()
    norm_inf = np.abs(m).sum(axis=1).max()
    if norm_1 == 0.0 or norm_inf == 0.0:
        raise ConvergenceError("zero matrix has no inverse")
    alpha = 1.0 / (norm_1 * norm_inf)
    eye = np.eye(n)
    x = alpha * m.T
    residual = np.abs(eye - m @ x).max()
    for used in range(max_p + 1):
        if residual <= tol:
            return x, used
        x = x @ (2.0 * eye - m @ x)
        residual = np.abs(eye - m @ x).max()
        if not np.isfinite(residual):
            break
    raise ConvergenceError(
        f"residual {residual:.3e} after {max_p} iterations (tol {tol:.1e}); "
        "matrix is singular or too ill-conditioned"
    )
