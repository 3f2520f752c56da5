class InputError(ValueError):
    """Invalid arguments or data handed to a public operation."""


class ConfigError(InputError):
    """Experiment configuration that cannot be run."""


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegeneratePotential(ArithmeticError):
    """Every site already sits on a center, so D^2 weights are all zero."""


class BudgetExceeded(RuntimeError):
    """An exact enumeration would exceed its outcome budget."""
