class HyprismError(Exception):
    """Base class for all engine errors."""


class ParseError(HyprismError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {col}" if col is not None else "")
        super().__init__(f"{message}{where}")


class ProgramError(HyprismError):
    """Well-formed text that does not describe a valid program."""


class TypeConflictError(HyprismError):
    """A variable is used inconsistently (discrete vs continuous)."""


class DerivationError(HyprismError):
    pass


class DerivationLimitError(DerivationError):
    def __init__(self, message: str, path=None):
        self.path = list(path or [])
        super().__init__(message)


class CycleError(DerivationError):
    pass


class ParameterError(HyprismError):
    """Missing or malformed distribution parameters."""


class AlgebraError(HyprismError):
    pass


class LearningError(HyprismError):
    pass


class UnprovableExampleError(LearningError):
    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)
