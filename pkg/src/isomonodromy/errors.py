"""Exception hierarchy shared by every module.

Errors fall in two families so that front ends can map them to exit codes:
``ValidationError`` means the input is outside the generic regime the
algorithms are defined on, ``NumericalFailure`` means the input was fine but a
numerical tolerance could not be met.
"""

from __future__ import annotations


class IsomonodromyError(Exception):
    """Base class for all library errors."""


class ValidationError(IsomonodromyError):
    """Input data violates a structural or genericity requirement."""


class NumericalFailure(IsomonodromyError):
    """A numerical procedure could not reach its tolerance."""


class ConfigError(IsomonodromyError):
    """A job configuration is malformed."""


# matcore
class EigenvalueCollision(ValidationError):
    pass


class ResonantShift(ValidationError):
    pass


class StepUnderflow(NumericalFailure):
    pass


# connection_model
class PoleEvaluation(ValidationError):
    pass


class TruncationTooShort(ValidationError):
    pass


class IncompatibleFraming(ValidationError):
    pass


# stokes_data
class DegenerateLeadingTerm(ValidationError):
    pass


class BaseOnRay(ValidationError):
    pass


class SupportViolation(NumericalFailure):
    pass


class NotUnipotent(ValidationError):
    pass


# orbit_geometry
class ShapeMismatch(ValidationError):
    pass


class SimplePoleUnsupported(ValidationError):
    pass


class OffLevelSet(ValidationError):
    pass


class OffSlice(ValidationError):
    pass


# monodromy_numeric
class MatchingUnreliable(NumericalFailure):
    pass


class TentacleDegenerate(ValidationError):
    pass


# isomonodromy_flows
class PoleCollision(ValidationError):
    pass


class GenericityLost(NumericalFailure):
    pass
