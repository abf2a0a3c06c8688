"""Exception types shared across the package.

The CLI maps these onto exit codes: ParameterError -> 2,
BudgetError / ResampleExhaustedError -> 3, OSError -> 4.
"""


class ParameterError(ValueError):
    """Invalid parameters, dimensions, or configuration."""


class BudgetError(RuntimeError):
    """Enumeration budget exceeded or a computed count overflows."""


class ResampleExhaustedError(RuntimeError):
    """A conditioned column failed to meet its norm threshold.

    Carries the index of the offending column.
    """

    def __init__(self, column: int, attempts: int):
        self.column = column
        self.attempts = attempts
        super().__init__(
            f"column {column} still below norm threshold after {attempts} attempts"
        )
