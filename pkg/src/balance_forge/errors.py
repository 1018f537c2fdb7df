"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: :class:`DataError` -> 3 and
:class:`NumericalError` -> 4.
"""


class BalanceForgeError(Exception):
    """Base class for all package errors."""


class DataError(BalanceForgeError, ValueError):
    """Input data violates a precondition (bad weights, missing columns, ...)."""


class NumericalError(BalanceForgeError, ArithmeticError):
    """A statistic or fit cannot be evaluated (zero variance, singular system)."""


class SingularDesignError(NumericalError):
    """Design matrix is rank deficient; ``column`` is the first dependent column."""

    def __init__(self, column: int, name: str | None = None):
        self.column = column
        self.name = name
        label = f"{column} ({name})" if name else str(column)
        super().__init__(f"design matrix is singular: column {label} is linearly dependent on earlier columns")
