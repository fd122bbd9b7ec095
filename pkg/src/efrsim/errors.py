"""Exception and warning types shared across the package."""


class EfrsimError(Exception):
    """Base class for all package-specific errors."""


class GridMismatch(EfrsimError):
    """Operands live on different grids."""


class ShapeMismatch(EfrsimError):
    """Array shapes are inconsistent with the declared grid."""


class NonHermitianInput(EfrsimError):
    """Spectral coefficients lack the conjugate symmetry of a real field."""


class NonZeroMeanRHS(EfrsimError):
    """Periodic Poisson right-hand side has a non-negligible mean."""


class ChiOutOfRange(EfrsimError):
    """Relax weight outside the admissible interval [0, 1]."""


class RatioMismatch(EfrsimError):
    """Fine grid size is not the required integer multiple of the coarse one."""


class InsufficientSnapshots(EfrsimError):
    """A trajectory retains fewer than two snapshots after subsampling."""


class EmptySnapshots(EfrsimError):
    """Snapshot matrices contain no columns."""


class GridMisaligned(EfrsimError):
    """Time grids or shell grids of two series do not line up."""


class ZeroReferenceShell(EfrsimError):
    """Every counted shell of the reference spectrum vanishes."""


class TooFewSamples(EfrsimError):
    """Ensemble statistics need at least two samples."""


class MissingReference(EfrsimError):
    """No reference series is available for a requested seed."""


class FilterMissing(EfrsimError):
    """The selected method needs a filter file that is not available."""


class ConfigError(EfrsimError):
    """Invalid or inconsistent run configuration."""


class IOFailure(EfrsimError):
    """A data file could not be read or written."""


class NumericalBlowup(EfrsimError):
    """The state became non-finite during time integration."""

    def __init__(self, message, last_valid_time=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class CFLExceeded(UserWarning):
    """Advisory warning: the convective CFL number exceeded one."""
