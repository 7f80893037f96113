"""Kernel selection: compiled labeling core when available, NumPy fallback
otherwise. Set SCMAP_PURE_PYTHON=1 to force the fallback. Both backends
implement the same contract and are cross-checked in the test suite."""

import os

if os.environ.get("SCMAP_PURE_PYTHON"):
    from .ccl_py import component_stats

    BACKEND = "python"
else:
    try:
        from ._ccl import component_stats

        BACKEND = "compiled"
    except ImportError:
        from .ccl_py import component_stats

        BACKEND = "python"

__all__ = ["component_stats", "BACKEND"]
