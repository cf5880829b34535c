"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Bad user input: malformed files, out-of-range parameters, unknown ids."""


class DegenerateInputError(InvalidInputError):
    """Input is well formed but carries no information (zero variance, zero mass)."""


class StateError(RuntimeError):
    """A workspace artifact needed by a command has not been computed yet."""


class GTFSError(InvalidInputError):
    def __init__(self, message: str, file: str | None = None, line: int | None = None):
        self.file = file
        self.line = line
        where = ""
        if file is not None:
            where = f"{file}:{line}: " if line is not None else f"{file}: "
        super().__init__(where + message)
