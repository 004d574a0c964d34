"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so callers that only
care about bad input can catch that; numerical and simulation failures
derive from :class:`RuntimeError`.
"""


class AvalancheError(Exception):
    """Base class for all package errors."""


class ValidationError(AvalancheError, ValueError):
    pass


class RatioOutOfRange(ValidationError):
    pass


class ThresholdViolation(ValidationError):
    pass


class BoundaryTie(ValidationError):
    pass


class BelowResolution(ValidationError):
    pass


class AboveUnit(ValidationError):
    pass


class OutOfUnit(ValidationError):
    pass


class BadRootIndex(ValidationError, IndexError):
    pass


class UnknownCoordinate(ValidationError, KeyError):
    pass


class SupportMismatch(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class DegenerateExpected(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class UnclosedSupport(AvalancheError, RuntimeError):
    pass


class SingularSystem(AvalancheError, RuntimeError):
    pass


class ToleranceNotMet(AvalancheError, RuntimeError):
    pass


class PopulationCap(AvalancheError, RuntimeError):
    pass


class InternalError(AvalancheError, RuntimeError):
    pass
