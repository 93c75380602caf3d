"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TeleplanError(Exception):
    """Base class for all package errors."""


class StateError(TeleplanError, ValueError):
    """Invalid state construction (dimensions, norm, ownership)."""


class DimensionLimitError(TeleplanError):
    """A configured size cap (amplitudes, matrix dimension, unit count) was exceeded."""


class NumericError(TeleplanError, ArithmeticError):
    """Eigensolver failure or a density matrix that is not positive semidefinite."""


class IsometryError(StateError):
    """Matrix is not an isometry or does not fit the target party."""


class SearchBudgetExceeded(TeleplanError):
    """Configuration-graph search expanded more nodes than allowed."""


class ParseError(TeleplanError, ValueError):
    """Syntax or elaboration error in a state description, with source position."""

    def __init__(self, message: str, line: int = 1, column: int = 1, token: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.token = token
        super().__init__(f"{line}:{column}: {message}" + (f" (at {token!r})" if token else ""))
