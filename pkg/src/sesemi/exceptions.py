"""Exception hierarchy shared across the package."""


class SesemiError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SesemiError, ValueError):
    """Tensor shapes are incompatible with the requested operation."""


class ParameterError(SesemiError, ValueError):
    """A hyper-parameter or argument is outside its valid range."""


class ContractError(SesemiError, RuntimeError):
    """A precondition of an operation was violated by the caller."""


class StateError(SesemiError, RuntimeError):
    """An object was used before it reached the required state."""


class NumericalError(SesemiError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class FormatError(SesemiError, ValueError):
    """A file or byte stream does not follow the expected layout."""


class ConfigError(SesemiError, ValueError):
    """An experiment configuration file is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
