"""Exception hierarchy for ptlab.

Numerical failures derive from :class:`NumericalError` so the command line
can map them onto a dedicated exit status.
"""


class PTLabError(Exception):
    """Base class of every error raised by the package."""


class NumericalError(PTLabError):
    """A computation could not be carried out to the requested accuracy."""


class DegenerateSpectrum(NumericalError):
    """Eigenvalues coalesce (exceptional point); eigenvectors are not a basis."""


class MetricNotDiagonalizable(NumericalError):
    pass


class NegativeRealAxisEigenvalue(NumericalError):
    """The principal matrix square root is undefined."""


class DegenerateQuadratic(NumericalError):
    """The stationary-point quadratic degenerates (vanishing coupling)."""


class StepSizeUnderflow(NumericalError):
    pass


class IntegrationFailure(NumericalError):
    pass


class NonRealSpectrum(NumericalError):
    """A normalized density matrix has eigenvalues off the real unit interval."""


class VanishingTrace(NumericalError):
    pass


class RegimeMismatch(PTLabError, ValueError):
    """An operation was requested outside the symmetry regime it is defined for."""


class WeightSumViolation(PTLabError, ValueError):
    pass


class ConfigError(PTLabError, ValueError):
    pass


class IoError(PTLabError, OSError):
    """An output sink could not be created or written."""
