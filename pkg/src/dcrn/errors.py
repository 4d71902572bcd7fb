"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(ValueError):
    """A value lies outside an operation's numeric domain."""


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateRowError(ValueError):
    """A row that must have positive norm is identically zero."""

    def __init__(self, row, message=None):
        self.row = int(row)
        super().__init__(message or f"row {row} has zero norm")


class EmptyClusterError(ValueError):
    """A cluster column carries zero total assignment mass."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite value."""


class ParseError(ValueError):
    """A data file could not be parsed."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = int(line)
        super().__init__(f"{path}:{line}: {message}")


class ManifestError(ValueError):
    """Dataset contents disagree with their manifest."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
