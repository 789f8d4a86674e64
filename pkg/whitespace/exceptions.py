"""
Error types raised by the whitespace modules.

Every error names the module and the operation that raised it, so the CLI can
print module-qualified messages. InputError subclasses map to exit code 2,
NumericalError subclasses to exit code 3.
"""
from typing import Optional


class WhitespaceError(ValueError):
    """Base class for all whitespace errors."""

    exit_code = 2

    def __init__(self, message: str, module: str = '', operation: str = ''):
        super().__init__(message)
        self.message = message
        self.module = module
        self.operation = operation

    def __str__(self):
        if self.operation:
            return f"{self.operation}: {self.message}"
        return self.message


class InputError(WhitespaceError):
    """Bad or insufficient input data."""

    exit_code = 2


class NumericalError(WhitespaceError):
    """The statistics fall outside the region a model can represent."""

    exit_code = 3


# --- trace_io ---
class ParseError(InputError):
    def __init__(self, message: str, row: Optional[int] = None, **kwargs):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message, **kwargs)
        self.row = row


class EmptyTrace(InputError):
    pass


class EmptyInput(InputError):
    pass


class TooFewRecords(InputError):
    pass


# --- stats ---
class TooFewSamples(InputError):
    pass


class DegenerateSeries(NumericalError):
    pass


# --- mmpp ---
class UnsupportedRegime(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


# --- baselines ---
class InsufficientTail(InputError):
    pass


class DegenerateFit(NumericalError):
    pass


# --- hmm / eval ---
class EmptySpan(InputError):
    pass


class TraceTooShort(InputError):
    pass


class LengthMismatch(InputError):
    pass
