"""Exception hierarchy.

The CLI maps these onto exit codes: ``DataError`` -> 3, ``NumericFailure`` -> 4.
"""


class AucMetaError(Exception):
    """Base class for all package errors."""


class InvalidArgument(AucMetaError, ValueError):
    pass


class InsufficientData(AucMetaError, ValueError):
    pass


class DegenerateData(AucMetaError, ValueError):
    pass


class NonIdentifiable(AucMetaError, ValueError):
    pass


class NumericFailure(AucMetaError, RuntimeError):
    """Optimizer or quadrature failure. ``diagnostics`` carries whatever state helps debug it."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataError(AucMetaError):
    """Unreadable or unusable input file."""

    def __init__(self, message, kind="data-error"):
        super().__init__(message)
        self.kind = kind
