"""Exception hierarchy shared by all chainlab modules."""


class ChainLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ChainLabError, ValueError):
    """An argument violates a documented precondition."""


class InsufficientDataError(ChainLabError):
    """Fewer observations than the operation requires."""


class CorpusIOError(ChainLabError):
    """A corpus path could not be read; the message names the path."""


class DataError(ChainLabError):
    """Malformed record or unknown label in user-supplied data."""


class TemplateError(ChainLabError):
    """Prompt placeholder mismatch; the message names the placeholder."""


class CompositionError(ChainLabError):
    """Declared language codomain/domain of two kernels do not chain."""


class DimensionError(ChainLabError):
    """Label sets or shapes of two operands do not match."""


class DegenerateSampleError(ChainLabError):
    """A statistic is undefined on this sample (e.g. zero variance)."""


class NonConvergenceError(ChainLabError):
    """Iterative solver failed its residual check."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InvariantViolationError(ChainLabError):
    """An internal mathematical invariant failed; indicates a bug."""


class ConfigurationError(ChainLabError):
    """Missing or inconsistent runtime configuration (e.g. auth token)."""


class ConfigParseError(ChainLabError):
    """Config file rejected; carries location/field diagnostics."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None, field: str | None = None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.field = field


class TransportError(ChainLabError):
    """HTTP request failed after any permitted retries."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 0):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class ProtocolError(ChainLabError):
    """Endpoint answered 200 with a body we cannot interpret."""


class BatchError(ChainLabError):
    """Every chain in a batch failed."""
