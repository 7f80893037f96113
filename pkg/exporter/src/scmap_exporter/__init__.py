"""Fixture exporter: runs images through a small vision transformer and
writes per-layer head-averaged attention, last-layer patch tokens, and a
3x3 conv head in the primary engine's tensor format."""

from .errors import ExporterError, UnsupportedArchitectureError, ExportValidationError
from .export import cross_check, export_dataset, export_head, export_image
from .model import MiniViT, load_model

__all__ = [
    "ExporterError",
    "UnsupportedArchitectureError",
    "ExportValidationError",
    "MiniViT",
    "load_model",
    "export_image",
    "export_head",
    "export_dataset",
    "cross_check",
]
