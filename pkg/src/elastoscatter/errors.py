"""Exception hierarchy.

Two roots map onto the CLI exit codes: ValidationError (bad input, exit 2)
and NumericalError (a well-posed input that the numerics cannot handle,
exit 3).
"""


class ValidationError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


class SingularEvaluationError(ValidationError):
    """Kernel evaluated at coincident points."""


class DomainError(ValidationError):
    """An argument lies outside the domain where a formula is valid."""


class RegimeError(ValidationError):
    """Scenario parameters violate the asymptotic regime constraints."""


class GeometryError(ValidationError):
    """Degenerate or overlapping cluster geometry."""


class NoRealResonanceError(NumericalError):
    """Requested a resonance from a non-positive eigenvalue."""


class SingularCoefficientError(NumericalError):
    """Scattering coefficient denominator vanishes (exact resonance)."""


class NearResonanceError(NumericalError):
    """The Foldy-Lax matrix is numerically singular."""

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class IterationError(NumericalError):
    """A fixed-point iteration failed to converge."""
