"""Exception types shared across the package."""


class TTAStreamError(Exception):
    """Base class for all package-specific errors."""


class ZeroVectorError(TTAStreamError):
    """Raised when a vector with (near-)zero norm reaches a normalization point."""


class DimensionMismatchError(TTAStreamError):
    """Raised when two operands disagree on embedding dimension."""


class BadMagicError(TTAStreamError):
    """File does not start with the expected container magic."""


class VersionUnsupportedError(TTAStreamError):
    """Container version is not one this reader understands."""


class TruncatedFileError(TTAStreamError):
    """File ended before a fixed-size section could be read."""


class TruncatedRecordError(TTAStreamError):
    """A stream record was cut off mid-way.

    Attributes:
        offset: byte offset at which the available data ends.
        record_index: index of the record that could not be completed.
    """

    def __init__(self, offset: int, record_index: int, path: str = ""):
        self.offset = offset
        self.record_index = record_index
        where = f" in {path}" if path else ""
        super().__init__(
            f"truncated record {record_index}{where}: data ends at byte offset {offset}"
        )


class MetadataMismatchError(TTAStreamError):
    """Header dimensions disagree with the metadata block."""


class DegenerateEnsembleError(TTAStreamError):
    """Retained prompt embeddings sum to (near) zero and cannot be normalized.

    Attributes:
        class_index: class whose ensemble degenerated, when known.
    """

    def __init__(self, message: str, class_index: int | None = None):
        self.class_index = class_index
        super().__init__(message)


class SeparationInfeasibleError(TTAStreamError):
    """Rejection sampling could not place class directions at the requested margin."""


class EmptyStreamError(TTAStreamError):
    """A run was requested over a stream with no samples."""
