"""Exception hierarchy.

Configuration and precondition failures derive from :class:`ConfigError`;
failures that happen while iterating derive from :class:`NumericalError`.
The CLI maps the two families onto distinct exit codes.
"""


class MannMixError(Exception):
    pass


class ConfigError(MannMixError, ValueError):
    """A parameter combination violates a hard precondition."""


class ParameterError(ConfigError):
    pass


class InvalidWindowError(ConfigError):
    """The rate window ``2/q < rho < a(1-c) < 1`` (or ``r > 2/rho``) fails."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class UnsupportedError(ConfigError):
    pass


class NumericalError(MannMixError, ArithmeticError):
    pass


class InvalidStateError(NumericalError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DomainEscapeError(NumericalError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class BoundNotApplicableError(NumericalError):
    pass


class NotFoundError(NumericalError):
    def __init__(self, message, bound_at_cap=None):
        super().__init__(message)
        self.bound_at_cap = bound_at_cap


class ReplicationError(NumericalError):
    def __init__(self, message, replication=None, step=None):
        super().__init__(message)
        self.replication = replication
        self.step = step
