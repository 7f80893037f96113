"""4-connected grid graph over an H x W patch lattice.

Node i sits at (row, col) = divmod(i, W); edges join horizontal and vertical
neighbors only. flatten/unflatten fix the row-major node order used
everywhere downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ShapeError

# laplacian_dense / adjacency_dense refuse to materialize above this
_DENSE_NODE_CAP = 4096


@dataclass(frozen=True, eq=False)
class PatchGraph:
    height: int
    width: int
    # CSR-style neighbor structure: neighbors of i are indices[indptr[i]:indptr[i+1]]
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.height * self.width

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def adjacency_dense(self) -> np.ndarray:
        """0/1 adjacency as float64. Capped: raises ArgumentError for large grids."""
        n = self.num_nodes
        if n > _DENSE_NODE_CAP:
            raise ArgumentError(f"dense adjacency capped at {_DENSE_NODE_CAP} nodes, got {n}")
        a = np.zeros((n, n))
        rows = np.repeat(np.arange(n), np.diff(self.indptr))
        a[rows, self.indices] = 1.0
        return a

    def laplacian_dense(self) -> np.ndarray:
        """degree matrix minus adjacency, float64. Same size cap as adjacency."""
        lap = -self.adjacency_dense()
        np.fill_diagonal(lap, self.degrees.astype(np.float64))
        return lap


def build_grid_graph(height: int, width: int) -> PatchGraph:
    """Construct the 4-connected lattice. height, width >= 1."""
    if height < 1 or width < 1:
        raise ArgumentError(f"grid dims must be >= 1, got {height}x{width}")
    h, w = int(height), int(width)
    n = h * w
    rows, cols = np.divmod(np.arange(n), w)
    # candidate neighbors in ascending index order: up, left, right, down
    offsets = np.array([-w, -1, 1, w])
    valid = np.stack(
        [rows > 0, cols > 0, cols < w - 1, rows < h - 1], axis=1
    )
    cand = np.arange(n)[:, None] + offsets[None, :]
    degrees = valid.sum(axis=1).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    indices = cand[valid].astype(np.int64)
    return PatchGraph(height=h, width=w, indptr=indptr, indices=indices, degrees=degrees)


def flatten(grid_map: np.ndarray) -> np.ndarray:
    """H x W map -> length H*W vector, row-major."""
    m = np.asarray(grid_map)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d map, got shape {m.shape}")
    return m.reshape(-1)


def unflatten(vec: np.ndarray, height: int, width: int) -> np.ndarray:
    """Length H*W vector -> H x W map; exact inverse of flatten."""
    v = np.asarray(vec)
    if v.ndim != 1 or v.size != height * width:
        raise ShapeError(f"expected a length-{height * width} vector, got shape {v.shape}")
    return v.reshape(height, width)
