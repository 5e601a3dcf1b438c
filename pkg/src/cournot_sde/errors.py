"""Exception hierarchy.

Two families: :class:`InvalidParams` (bad input, CLI exit code 2) and
:class:`NumericalFailure` (a computation could not be completed, exit code 3).
"""


class CournotSdeError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class InvalidParams(CournotSdeError, ValueError):
    exit_code = 2


class NumericalFailure(CournotSdeError, ArithmeticError):
    exit_code = 3


class SingularState(NumericalFailure):
    """State too close to the inverse-demand singularity x1 + x2 = 0."""


class DegenerateNoise(NumericalFailure):
    """The angular diffusion q4(theta)**2 vanishes somewhere on the circle."""


class NonPositiveDensity(NumericalFailure):
    pass


class SchemeBreakdown(NumericalFailure):
    """A denominator of the backward-difference recurrence vanished."""


class ResidualTooLarge(NumericalFailure):
    """A constructed density does not satisfy the stationary Fokker-Planck equation."""


class DivisionDegenerate(NumericalFailure):
    pass


class MismatchedPaths(InvalidParams):
    pass


class NumericalOverflow(NumericalFailure):
    pass
