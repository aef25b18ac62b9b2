"""Exception types shared across the package.

The CLI maps these onto distinct exit codes (usage 1, data 2, numerical 3),
so library code should prefer them over bare ValueError/ArithmeticError when
the failure falls in one of these two buckets.
"""


class DataError(ValueError):
    """Malformed, missing, or dimensionally inconsistent input data."""


class NumericalError(ArithmeticError):
    """Non-finite values or divergence encountered during computation."""
