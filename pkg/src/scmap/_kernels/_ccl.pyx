# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled two-pass connected-component labeling (4-connectivity).

Contract matches ccl_py.component_stats: boxes are half-open
[x0, y0, x1, y1] int64, components ordered by first pixel in row-major
scan order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline cnp.int32_t _find(cnp.int32_t[::1] parent, cnp.int32_t i) nogil:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def component_stats(mask):
    """Label 4-connected foreground components of a boolean mask.

    Returns (boxes, areas); see ccl_py.component_stats for the contract.
    """
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {m.shape}")

    cdef cnp.uint8_t[:, ::1] mv = m
    cdef Py_ssize_t h = mv.shape[0]
    cdef Py_ssize_t w = mv.shape[1]

    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] labels = labels_arr
    # worst case (checkerboard): one provisional label per two pixels, +1 for background slot
    parent_arr = np.zeros(h * w // 2 + 2, dtype=np.int32)
    cdef cnp.int32_t[::1] parent = parent_arr

    cdef cnp.int32_t next_label = 1
    cdef cnp.int32_t left, up, ra, rb, lab
    cdef Py_ssize_t r, c

    with nogil:
        for r in range(h):
            for c in range(w):
                if mv[r, c] == 0:
                    continue
                left = labels[r, c - 1] if c > 0 else 0
                up = labels[r - 1, c] if r > 0 else 0
                if left == 0 and up == 0:
                    parent[next_label] = next_label
                    labels[r, c] = next_label
                    next_label += 1
                elif left == 0:
                    labels[r, c] = up
                elif up == 0:
                    labels[r, c] = left
                else:
                    ra = _find(parent, left)
                    rb = _find(parent, up)
                    if ra < rb:
                        parent[rb] = ra
                        labels[r, c] = ra
                    else:
                        parent[ra] = rb
                        labels[r, c] = rb

    # compact roots to component ids in first-seen (row-major) order
    compact_arr = np.zeros(next_label, dtype=np.int32)
    cdef cnp.int32_t[::1] compact = compact_arr
    cdef cnp.int32_t ncomp = 0
    cdef cnp.int32_t i, root
    for i in range(1, next_label):
        if _find(parent, i) == i:
            ncomp += 1
            compact[i] = ncomp  # 1-based while accumulating

    boxes_arr = np.empty((ncomp, 4), dtype=np.int64)
    areas_arr = np.zeros(ncomp, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] boxes = boxes_arr
    cdef cnp.int64_t[::1] areas = areas_arr
    cdef cnp.int32_t cid
    for i in range(ncomp):
        boxes[i, 0] = w
        boxes[i, 1] = h
        boxes[i, 2] = 0
        boxes[i, 3] = 0

    with nogil:
        for r in range(h):
            for c in range(w):
                lab = labels[r, c]
                if lab == 0:
                    continue
                cid = compact[_find(parent, lab)] - 1
                if c < boxes[cid, 0]:
                    boxes[cid, 0] = c
                if r < boxes[cid, 1]:
                    boxes[cid, 1] = r
                if c + 1 > boxes[cid, 2]:
                    boxes[cid, 2] = c + 1
                if r + 1 > boxes[cid, 3]:
                    boxes[cid, 3] = r + 1
                areas[cid] += 1

    return boxes_arr, areas_arr
