"""Exception and warning types shared across the package."""


class LambdaShelveError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameters(LambdaShelveError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DegenerateRoots(LambdaShelveError):
    """Two characteristic roots coincide; partial fractions are unusable."""


class EqualDetunings(LambdaShelveError):
    """The requested formula is singular at delta1 == delta2."""


class StepUnderflow(LambdaShelveError):
    """Adaptive integrator needed a step below the resolvable minimum."""


class RootSolveFailure(LambdaShelveError):
    """Inverting the survival function did not converge."""


class UnsortedRecord(LambdaShelveError, ValueError):
    """Count record event times are not strictly increasing."""


class RegimeWarning(UserWarning):
    """Parameters lie outside the regime where an approximation is meaningful."""
