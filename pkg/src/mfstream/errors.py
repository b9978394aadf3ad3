"""Exception types shared across the package."""


class MFStreamError(Exception):
    """Base class for every error raised by mfstream."""


class ParameterError(MFStreamError, ValueError):
    """A model or estimator parameter is outside its valid range.

    ``field`` names the offending parameter when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(MFStreamError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class ContractError(MFStreamError, ValueError):
    """Two inputs are incompatible (length or grid mismatch)."""


class DegenerateInputError(MFStreamError, ValueError):
    """An input has zero variance where a positive one is required."""


class SizeError(MFStreamError, ValueError):
    """A series is too short for the requested scales."""


class EmbeddingError(MFStreamError, RuntimeError):
    """Circulant embedding kept producing negative eigenvalues."""


class TraceFormatError(MFStreamError, ValueError):
    """A trace or spectrum file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line
