"""Exception types shared across the package.

The CLI maps these onto process exit codes, so subcommands raise rather
than printing and dying in place.
"""


class CatpressError(Exception):
    """Base class for all package errors."""


class ChannelUnderflow(CatpressError):
    """A derived channel count fell below 1 while building an architecture."""


class ParseError(CatpressError):
    """Malformed JSON. Carries line/column of the failure."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SchemaError(CatpressError):
    """Structurally valid JSON that does not match the architecture schema."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{message}" + (f" [field: {field}]" if field else ""))
        self.field = field


class ShapeError(CatpressError):
    """Inconsistent tensor or layer shapes."""


class NoPrunableNorms(CatpressError):
    """The architecture has no prunable normalization layers to collect scales from."""


class BudgetInfeasible(CatpressError):
    """No threshold meets the budget, even with every prunable channel removed."""


class BatchMismatch(CatpressError):
    """Two feature matrices disagree on batch size."""


class DegenerateInput(CatpressError):
    """An all-zero feature matrix was passed where a similarity is undefined."""


class TapMismatch(CatpressError):
    """Teacher and student feature sets disagree on distillation tap points."""


class DivergenceError(CatpressError):
    """A training loss became NaN or infinite."""


class ArchHashMismatch(CatpressError):
    """A checkpoint does not belong to the architecture it was loaded against."""


class TapeConsumed(CatpressError):
    """backward() was called twice on the same tape."""
