"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class SingularMatrixError(RuntimeError):
    """A matrix that must be positive definite failed to factorize."""


class NumericalError(RuntimeError):
    """Non-finite values appeared during a computation."""


class DegenerateProblemError(ValueError):
    """The instance cannot be solved (e.g. all-zero input matrix)."""


class DivergenceError(RuntimeError):
    """An iterative solver blew up instead of converging."""


class ConfigError(ValueError):
    """A configuration value is outside its admissible range."""


class MatrixParseError(ValueError):
    """A matrix file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
