"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class ExcessDistError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(ExcessDistError, ValueError):
    """Malformed instance, run configuration, or parameter."""

    exit_code = 2


class InfeasibleDistortionError(ExcessDistError, ValueError):
    """A distortion target lies below the minimum achievable distortion."""

    exit_code = 3


class RegimeError(ExcessDistError, ValueError):
    """A log-loss result was requested outside the region where it holds."""

    exit_code = 3


class ConvergenceError(ExcessDistError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``last_iterate`` holds whatever the solver had when it gave up.
    """

    exit_code = 3

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class BudgetExceededError(ExcessDistError):
    """Exhaustive enumeration would exceed the configured work budget."""

    exit_code = 4


class UndefinedInformationError(ExcessDistError, ValueError):
    """An information density was requested where it is undefined."""

    exit_code = 2
