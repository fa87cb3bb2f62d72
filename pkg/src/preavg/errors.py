"""Exception hierarchy.  CLI exit codes key off these classes."""


class PreavgError(Exception):
    """Base class for library errors."""


class ConfigError(PreavgError, ValueError):
    """Malformed user input: config files, CSV, weight specs, parameters."""


class NumericalError(PreavgError, ArithmeticError):
    """A numerical routine failed to meet its accuracy contract."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error {achieved:.3e})")
        self.achieved = achieved
