from typing import Optional


class UniprotError(ValueError):
    """Base error. Every subclass carries a stable code used by the CLI."""

    code = "E_GENERIC"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


class InvalidInputError(UniprotError):
    code = "E_INPUT"


class MassMismatchError(UniprotError):
    code = "E_MASS"


class CapacityError(UniprotError):
    code = "E_CAPACITY"


class EmptySelectionError(UniprotError):
    code = "E_EMPTY"


class BudgetError(UniprotError):
    code = "E_BUDGET"


class GuardExceededError(UniprotError):
    code = "E_GUARD"


class SolverError(UniprotError):
    code = "E_SOLVER"


class DataFileError(UniprotError):
    code = "E_FILE"


class FormatError(UniprotError):
    code = "E_FORMAT"


class RaggedRowError(UniprotError):
    code = "E_RAGGED"

    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


class NonNumericCellError(UniprotError):
    code = "E_NUMERIC"

    def __init__(self, message: str, row: int, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column
