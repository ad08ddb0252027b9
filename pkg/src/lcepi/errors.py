"""Exception hierarchy.

Numerical-resolution problems and contract violations are kept apart so that
callers (and the CLI exit codes) never confuse a grid artifact with a
violated inequality.
"""


class LcepiError(Exception):
    """Base class for all toolkit errors."""


class ParameterDomainError(LcepiError, ValueError):
    """A parameter lies outside its admissible domain (e.g. sigma <= 0)."""


class LogConcavityError(ParameterDomainError):
    """Family parameters that would break log-concavity."""


class ContractError(LcepiError, ValueError):
    """Inputs violate an operation contract (dimension/spacing mismatch, ...)."""


class PreconditionError(LcepiError):
    """A mathematical precondition failed, e.g. a non-log-concave input."""


class ResolutionError(LcepiError):
    """The grid cannot resolve the requested quantity."""


class TruncationError(ResolutionError):
    """Probability mass outside the grid exceeds the allowed deficit."""


class HorizonTooShortError(ResolutionError):
    """Time horizon too short for the requested tail accuracy.

    The partially accumulated report is attached as ``partial``; its values
    remain valid lower bounds.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(LcepiError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
