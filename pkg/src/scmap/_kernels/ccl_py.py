"""Pure-NumPy connected components via run-length encoding + union-find.

Same contract as the compiled kernel: 4-connectivity, components ordered by
first pixel in row-major scan order, boxes half-open [x0, y0, x1, y1].
"""

from __future__ import annotations

import numpy as np


def _find(parent, i):
    # path halving
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def component_stats(mask) -> tuple[np.ndarray, np.ndarray]:
    """Label 4-connected foreground components of a boolean mask.

    Returns (boxes, areas): boxes is K x 4 int64 [x0, y0, x1, y1] half-open,
    areas is length-K int64 pixel counts. Ordered by each component's first
    foreground pixel in row-major order. Empty mask -> K = 0.
    """
    m = np.ascontiguousarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {m.shape}")
    h, w = m.shape
    if not m.any():
        return np.zeros((0, 4), dtype=np.int64), np.zeros(0, dtype=np.int64)

    # run-length encode each row: transitions of the 0-padded row signal
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = m
    diff = np.diff(padded, axis=1)
    start_r, start_c = np.nonzero(diff == 1)
    _, end_c = np.nonzero(diff == -1)
    # starts and ends interleave per row, so the k-th start matches the k-th end
    nruns = start_r.size
    run_row = start_r
    run_c0 = start_c
    run_c1 = end_c  # exclusive

    parent = np.arange(nruns, dtype=np.int64)
    row_begin = np.searchsorted(run_row, np.arange(h + 1))

    # union runs in adjacent rows that overlap by at least one column
    for r in range(1, h):
        a, a_end = row_begin[r - 1], row_begin[r]
        b, b_end = row_begin[r], row_begin[r + 1]
        while a < a_end and b < b_end:
            if run_c0[a] < run_c1[b] and run_c0[b] < run_c1[a]:
                ra, rb = _find(parent, a), _find(parent, b)
                if ra != rb:
                    # keep the smaller root so roots stay first-seen
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
            # advance the run that ends first
            if run_c1[a] < run_c1[b]:
                a += 1
            else:
                b += 1

    # unions keep the smaller root, so a component's root is its first run;
    # ascending root order is therefore row-major first-pixel order
    roots = np.array([_find(parent, k) for k in range(nruns)], dtype=np.int64)
    _, comp_of = np.unique(roots, return_inverse=True)
    ncomp = int(comp_of.max()) + 1

    boxes = np.empty((ncomp, 4), dtype=np.int64)
    boxes[:, 0] = boxes[:, 1] = np.iinfo(np.int64).max
    boxes[:, 2] = boxes[:, 3] = 0
    areas = np.zeros(ncomp, dtype=np.int64)
    np.minimum.at(boxes[:, 0], comp_of, run_c0)
    np.minimum.at(boxes[:, 1], comp_of, run_row)
    np.maximum.at(boxes[:, 2], comp_of, run_c1)
    np.maximum.at(boxes[:, 3], comp_of, run_row + 1)
    np.add.at(areas, comp_of, run_c1 - run_c0)
    return boxes, areas
