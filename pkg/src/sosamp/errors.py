"""Exception types shared across the package."""


class SosampError(Exception):
    """Base class for package errors."""


class ParseError(SosampError, ValueError):
    """Malformed input text (FCIDUMP header, non-numeric record, ...)."""


class OracleLimitError(SosampError):
    """Requested dense construction exceeds the configured orbital limit."""


class NormalizationError(SosampError, ValueError):
    """A vector or block-encoding normalization condition is violated."""


class DivergenceError(SosampError, FloatingPointError):
    """Optimizer produced a non-finite loss."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


class DomainError(SosampError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class DegenerateDistributionError(SosampError, ValueError):
    """Probability vector with zero total weight."""
