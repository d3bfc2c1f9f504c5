"""Exception taxonomy shared by all traitlab modules."""


class TraitLabError(Exception):
    """Base class for all traitlab errors."""


class ConfigError(TraitLabError):
    """Run configuration is missing a field or fails validation."""


class NumericalError(TraitLabError):
    """A numerical procedure left its admissible regime."""


class AllZeroError(TraitLabError):
    """Density values are all zero (or negative beyond the clamp tolerance)."""


class NonPositiveVarianceError(TraitLabError):
    """Gaussian kernel requested with variance <= 0."""


class GridMismatchError(TraitLabError):
    """Operands live on different grids."""


class TooLargeError(TraitLabError):
    """Problem size exceeds the guard of a deliberately slow reference path."""


class MeansDifferError(TraitLabError):
    """Contraction check requires mean-matched inputs."""


class DegeneratePairError(TraitLabError):
    """Distance between inputs is below resolution; a ratio would be noise."""


class ZeroSelectionMassError(TraitLabError):
    """Selection integral of the measure vanishes; tilt is undefined."""


class MisalignedError(TraitLabError):
    """Trajectory records do not share the same time lattice."""


class OutOfRangeError(TraitLabError):
    """Macroscopic field queried outside the quadrature-safe range."""


class StepUnstableError(NumericalError):
    """Explicit Euler step produced more negative mass than the clamp budget."""


class DivergedError(NumericalError):
    """ODE trajectory left the quadrature-safe range."""


class NotConvergedError(NumericalError):
    """Fixed-point iteration exhausted its budget.

    Carries the residual history so callers can inspect the stall.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []
