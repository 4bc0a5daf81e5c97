"""Exception hierarchy shared by all weakctl modules."""

__all__ = [
    "WeakControlError", "DivisionAtZero", "UnstableSystem", "ImproperSystem",
    "NonMinimumPhaseModel", "ImproperQ", "ZeroBudget", "InvalidWeights",
    "DimensionMismatch", "InfeasibleBox", "InfeasibleRequest", "NonZeroReference",
    "ConfigMismatch", "ConfigError",
]


class WeakControlError(Exception):
    """Base class for every error raised by weakctl."""


# lti
class DivisionAtZero(WeakControlError, ZeroDivisionError):
    pass


class UnstableSystem(WeakControlError, ValueError):
    pass


class ImproperSystem(WeakControlError, ValueError):
    pass


# imc
class NonMinimumPhaseModel(WeakControlError, ValueError):
    pass


class ImproperQ(WeakControlError, ValueError):
    pass


class ZeroBudget(WeakControlError, ValueError):
    pass


class InvalidWeights(WeakControlError, ValueError):
    pass


class DimensionMismatch(WeakControlError, ValueError):
    pass


# consumers
class InfeasibleBox(WeakControlError, ValueError):
    pass


class InfeasibleRequest(WeakControlError):
    """The consumer boxes cannot meet the request; carries the minimal slack."""

    def __init__(self, message, slack=0.0):
        super().__init__(message)
        self.slack = slack


# scenario / config
class NonZeroReference(WeakControlError, ValueError):
    pass


class ConfigMismatch(WeakControlError, ValueError):
    pass


class ConfigError(WeakControlError, ValueError):
    """Config validation failure, anchored to a line of the source file."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.bare_message = message
