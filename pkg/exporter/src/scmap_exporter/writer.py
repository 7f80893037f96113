"""This package's own serializer for the primary engine's tensor format.

Independent of the primary's implementation on purpose: the cross-check
(primary reader against these bytes) then actually verifies format
compatibility instead of comparing a writer with itself.

Layout (little-endian): magic ``SCMT``, version byte 0x01, dtype byte 0x00
(float32), rank byte (1..4), rank u32 dims (each >= 1), then row-major
float32 payload.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import ExportValidationError

MAGIC = b"SCMT"
VERSION = 1
DTYPE_FLOAT32 = 0
MAX_RANK = 4


def tensor_bytes(arr) -> bytes:
    rank = np.asarray(arr).ndim  # before coercion: ascontiguousarray promotes 0-d to 1-d
    if not 1 <= rank <= MAX_RANK:
        raise ExportValidationError(f"rank must be 1..{MAX_RANK}, got {rank}")
    a = np.ascontiguousarray(arr, dtype="<f4")
    if any(d < 1 for d in a.shape):
        raise ExportValidationError(f"dims must be positive, got {a.shape}")
    header = MAGIC + struct.pack(f"<BBB{a.ndim}I", VERSION, DTYPE_FLOAT32, a.ndim, *a.shape)
    return header + a.tobytes()


def write_scmt(path, arr) -> str:
    """Write one tensor file; returns its sha256 hex digest."""
    raw = tensor_bytes(arr)
    with open(path, "wb") as fh:
        fh.write(raw)
    return hashlib.sha256(raw).hexdigest()


def sha256_file(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
