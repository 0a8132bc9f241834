class DivlabError(Exception):
    """Base class for divlab errors."""

class DimensionMismatchError(DivlabError, ValueError):
    pass

class InvalidDistributionError(DivlabError, ValueError):
    """Raised when masses are negative, non-finite, or do not sum to 1."""
    pass

class ParameterError(DivlabError, ValueError):
    pass

class DomainError(DivlabError, ValueError):
    """Raised when an argument lies outside a function's real domain."""
    pass

class NumericalError(DivlabError):
    """Raised when an objective or integrand returns NaN or a non-finite value."""
    pass

class PreconditionError(DivlabError, ValueError):
    pass

class GeneratorClassError(DivlabError):
    """Raised when a generator fails a structural condition required by a bound."""
    pass

class UnreachableLeafCountError(DivlabError, ValueError):
    pass

class InputFormatError(DivlabError, ValueError):
    """Raised for malformed JSON inputs; carries the line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
