"""Exception types shared across the package."""


class HardwallError(Exception):
    """Base class for all package errors."""


class ParameterError(HardwallError, ValueError):
    """A caller-supplied parameter is outside its allowed range."""


class UsageError(HardwallError, TypeError):
    """An operation was invoked with an incompatible model variant."""


class InvariantViolation(HardwallError, RuntimeError):
    """A state invariant (e.g. the hard wall) was found broken."""


class FitError(HardwallError, RuntimeError):
    """A least-squares fit could not be carried out."""


class QuadratureError(HardwallError, RuntimeError):
    """A quadrature result did not meet its accuracy target."""


class ConfigError(HardwallError, ValueError):
    """Invalid experiment configuration; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
