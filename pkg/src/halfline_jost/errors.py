"""Exception hierarchy.

Every numerical failure raised by the package derives from
:class:`HalflineJostError`.  The CLI maps :class:`InvalidInput` subclasses to
exit status 2 and :class:`NumericalBudgetError` subclasses to exit status 3.
"""


class HalflineJostError(Exception):
    """Base class for all package errors."""


class InvalidInput(HalflineJostError, ValueError):
    """Input data violates a documented precondition."""


class NumericalBudgetError(HalflineJostError, RuntimeError):
    """A computation could not meet its error budget."""


# boundary conditions
class ShapeMismatch(InvalidInput):
    pass


class NotSelfAdjointBC(InvalidInput):
    pass


class DegenerateBC(InvalidInput):
    pass


class SingularTransform(InvalidInput):
    pass


# potentials
class DerivativeUnavailable(InvalidInput):
    pass


class NotFaddeev(InvalidInput):
    pass


# ODE solving
class TailTooShort(NumericalBudgetError):
    pass


class ZeroWavenumberOnAxis(InvalidInput):
    pass


class IntegratorFailure(NumericalBudgetError):
    pass


# asymptotic series
class SmoothnessRequired(InvalidInput):
    pass


class QuadratureFailure(NumericalBudgetError):
    pass


class TruncationTooShort(InvalidInput):
    pass


class LeadingCoefficientZero(NumericalBudgetError):
    pass


# spectrum
class ScanResolutionTooCoarse(NumericalBudgetError):
    pass


class MultiplicityMismatch(NumericalBudgetError):
    pass


class InconsistentMu(NumericalBudgetError):
    pass


class MeshTooCoarse(NumericalBudgetError):
    pass


# trace identities
class BranchAmbiguity(NumericalBudgetError):
    pass


class InsufficientEOrder(InvalidInput):
    pass


class QuadratureBudgetExceeded(NumericalBudgetError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
