"""Exception hierarchy shared across the package.

Two families matter to callers: ``DataError`` covers malformed files, bad
configuration and ill-posed inputs (CLI exit code 2); ``NumericalError``
covers failures of the numerics themselves -- singular attitudes, covariance
blow-ups, loss of positive definiteness (CLI exit code 3).

Errors raised from inside a sample loop carry an ``index`` attribute naming
the offending sample, file line or integration step.
"""


class DragEkfError(Exception):
    """Base class for every error raised by this package."""

    def __init__(self, message: str, *, index: int | None = None):
        super().__init__(message)
        self.index = index


class DataError(DragEkfError):
    """Bad input: files, configuration or argument values."""


class ShapeError(DataError):
    """An array does not have the fixed dimensions the operation requires."""


class MalformedRowError(DataError):
    """A CSV row (or header) cannot be parsed against the schema."""


class NonMonotonicTimeError(DataError):
    """Timestamps are not strictly increasing."""


class UnknownKeyError(DataError):
    """A config file contains a key the schema does not define."""


class MissingKeyError(DataError):
    """A config file omits a key that is required in context."""


class ConfigValueError(DataError):
    """A config value is outside its legal range (e.g. non-positive noise)."""


class NoOverlapError(DataError):
    """Truth and estimate series share less than one second of time."""


class MisalignedTimeError(DataError):
    """Two logs that must overlap in time do not."""


class InsufficientExcitationError(DataError):
    """The data does not excite the quantity being identified."""


class MissingVarianceError(DataError):
    """A consistency statistic was requested from a series without variances."""


class LowAccelMagnitudeError(DataError):
    """Accelerometer magnitude too far from gravity to reference attitude."""


class NumericalError(DragEkfError):
    """The numerics failed at runtime."""


class AttitudeSingularityError(NumericalError):
    """Attitude reached the Euler-kinematics singularity guard."""


class CovarianceBlowupError(NumericalError):
    """Covariance trace exceeded the configured ceiling."""


class NotPositiveDefiniteError(NumericalError):
    """A covariance that must be positive definite is not."""
