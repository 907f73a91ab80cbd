"""Exception hierarchy shared by all modules."""


class NoRegretError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(NoRegretError, ValueError):
    """An argument is outside its admissible range."""


class StructuralError(NoRegretError, ValueError):
    """Shapes or dimensions of inputs do not match."""


class ContractError(NoRegretError, ValueError):
    """An input violates a documented precondition (e.g. loss outside [0, 1])."""


class CapacityError(NoRegretError):
    """The request exceeds the desk-scale limits of an exhaustive routine."""


class NumericalError(NoRegretError, ArithmeticError):
    """A numerical routine failed its residual check."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CertificateError(NoRegretError):
    """No multiplicative certificate exists for a pair of chains."""


class FitError(NoRegretError, ValueError):
    """A log-log fit cannot be computed from the given points."""


class ConfigError(NoRegretError, ValueError):
    """An experiment config failed validation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
