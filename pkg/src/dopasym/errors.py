"""Shared exception types.

Every stage of the pipeline raises a subclass of :class:`DopasymError`,
so the harness can tag failures with the stage that produced them.
"""


class DopasymError(Exception):
    """Base class for all package errors."""


class GrowthConditionError(DopasymError):
    """The potential fails the confinement growth probe."""


class TruncationError(DopasymError):
    """No admissible truncation radius on the configured grid."""


class PrecisionExhaustedError(DopasymError):
    """Loss of positivity in the orthogonalization at some degree."""


class SolverError(DopasymError):
    """The equilibrium QP did not converge; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class UnresolvedStructureError(DopasymError):
    """A band or gap is too narrow for the current grid."""


class RegularityError(DopasymError):
    """The equilibrium measure violates a regularity condition."""


class DomainError(DopasymError):
    """An evaluation point violates an operation's domain precondition."""


class DegenerateSurfaceError(DopasymError):
    """The A-cycle linear system is singular (quadrature failure)."""


class ThetaTruncationError(DopasymError):
    """Requested theta tail bound unreachable at maximum truncation."""


class NumericalDegeneracyError(DopasymError):
    """A theta denominator vanished away from its known zero set."""


class StageError(DopasymError):
    """Wraps an error with the pipeline stage where it occurred."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
