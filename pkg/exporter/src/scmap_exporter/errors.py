class ExporterError(Exception):
    """Base for everything this package raises on purpose."""


class UnsupportedArchitectureError(ExporterError):
    """The backbone cannot provide what the export needs (e.g. no CLS token)."""


class ExportValidationError(ExporterError):
    """Invalid shapes, arguments, or manifest contents."""
