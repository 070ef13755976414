"""Exception types raised across the package.

Every computational failure derives from :class:`FloquetError`; the CLI maps
those to exit code 1.
"""


class FloquetError(Exception):
    """Base class for computation errors."""


class DegenerateFrequency(FloquetError):
    """Some F(n) vanishes exactly for n != 0 inside the cutoff."""


class CutoffTooSmall(FloquetError):
    """A quantity needs lattice data beyond the configured cutoff."""


class InvalidComposition(FloquetError, ValueError):
    pass


class NotAPath(FloquetError, ValueError):
    pass


class ZeroDenominator(FloquetError, ZeroDivisionError):
    """A resolvent factor 1/(F(n) - lambda) hit an exact zero."""


class PreconditionViolated(FloquetError, ValueError):
    pass


class OrderTooLarge(FloquetError, ValueError):
    pass


class NoAdmissibleLambdaStar(FloquetError):
    pass


class NoSolution(FloquetError):
    """The fixed-point equation has no root for this sign of lambda."""


class NoSignChange(FloquetError):
    """A bisection bracket does not contain a sign change."""


class InsufficientRange(FloquetError):
    pass


class SingularShift(FloquetError):
    pass


class NoConvergence(FloquetError):
    pass


class IllConditionedFit(FloquetError):
    pass


class DivergenceWarning(UserWarning):
    """|beta| lies outside the region where the g-series is known to converge."""
