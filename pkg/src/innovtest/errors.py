"""Exception hierarchy shared across the package."""


class InnovTestError(Exception):
    """Base class for all package errors."""


class InputError(InnovTestError):
    """Malformed user input: files, configs, CLI arguments."""


class NumericError(InnovTestError):
    """Numerical failure: singular matrices, failed factorizations,
    non-convergent quadrature."""


class EstimationError(InnovTestError):
    """Model fitting failed on the given data."""
