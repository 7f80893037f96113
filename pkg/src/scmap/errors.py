"""Exception taxonomy for the toolkit.

Callers can catch ScmapError to handle any toolkit failure, or one of the
narrower classes to branch on cause.
"""


class ScmapError(Exception):
    """Base class for all toolkit errors."""


class StorageError(ScmapError):
    """File could not be read or written (I/O level)."""


class FormatError(ScmapError):
    """Bytes are not a valid tensor file: bad magic, version, dtype code,
    rank, dims, or a payload that does not match the header."""


class ParseError(ScmapError):
    """A text record (annotation line, config line) could not be parsed."""


class ValidationError(ScmapError):
    """Structurally parseable data violates a documented invariant."""


class ShapeError(ScmapError):
    """Array dimensions do not match what the operation requires."""


class ArgumentError(ScmapError):
    """A parameter value is outside its documented domain."""


class NumericError(ScmapError):
    """Base class for numerical failures."""


class InstabilityError(NumericError):
    """Explicit integration diverged (state norm passed the overflow guard)."""


class SingularMatrixError(NumericError):
    """Elimination hit a pivot too small to trust; matrix treated as singular."""


class ConvergenceError(NumericError):
    """An iterative scheme did not reach its tolerance within the iteration cap."""
