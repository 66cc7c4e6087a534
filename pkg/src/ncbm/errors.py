"""Exception hierarchy shared by every module of the package."""


class NcbmError(Exception):
    """Base class for all errors raised by :mod:`ncbm`."""


class OrderViolation(NcbmError, ValueError):
    """Values are not (strictly or weakly) increasing as required."""


class NonPositiveFactor(NcbmError, ValueError):
    """A dilatation factor was zero or negative."""


class NonPositiveTime(NcbmError, ValueError):
    """A time argument that must be strictly positive was not."""


class SizeMismatch(NcbmError, ValueError):
    """Configurations or drift vectors have inconsistent lengths."""


class DegenerateStart(NcbmError, ValueError):
    """The starting configuration sits on the boundary of the Weyl chamber.

    Only strictly ordered starts and the fully collapsed start (all particles
    at one point) are supported; use :func:`ncbm.densities.drifted_density_from_origin`
    for the latter.
    """


class InvalidTau(NcbmError, ValueError):
    """Theta-function modulus outside the upper half plane."""


class StepFailure(NcbmError, RuntimeError):
    """Adaptive SDE step size shrank below the hard floor."""


class TooLarge(NcbmError, ValueError):
    """Brute-force oracle requested for more particles than it supports."""
