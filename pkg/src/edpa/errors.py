"""Exception types shared across the package."""


class EdpaError(Exception):
    """Base class for library errors."""


class DomainError(EdpaError, ValueError):
    """An argument lies outside the domain of the operation."""


class PoleError(DomainError):
    """The argument sits on (or numerically at) a pole."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class AccuracyError(EdpaError, ArithmeticError):
    """A series or quadrature failed to reach its tolerance."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class UnsupportedError(EdpaError, NotImplementedError):
    """The requested representation is not available for these inputs."""


class StepFailure(EdpaError, RuntimeError):
    """Step halving was exhausted while integrating a path."""

    def __init__(self, message, time=None, gap=None):
        super().__init__(message)
        self.time = time
        self.gap = gap
