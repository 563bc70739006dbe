"""Exception hierarchy shared by all modules."""


class YoungFbmError(Exception):
    """Base class for every error raised by this package."""


class InvalidPathError(YoungFbmError, ValueError):
    """Path data is malformed: wrong node count, non-finite values, bad spacing."""


class DegeneratePathError(YoungFbmError, ValueError):
    """The path carries no information for the requested statistic (e.g. constant)."""


class GridError(YoungFbmError, ValueError):
    """Misaligned grids, off-grid times, or a dyadic depth the grid cannot resolve."""


class HypothesisError(YoungFbmError, ValueError):
    """A mathematical hypothesis of a formula is violated (e.g. beta + gamma <= 1)."""


class StepTooCoarseError(YoungFbmError):
    """Step-size conditions fail even for a single grid cell.

    ``reached`` holds the time up to which the solution was built.
    """

    def __init__(self, message, reached=None):
        super().__init__(message)
        self.reached = reached


class PicardError(YoungFbmError):
    """Picard iteration did not converge or an iterate left the Hölder ball."""


class FactorizationError(YoungFbmError):
    """A covariance matrix could not be factorized even after jitter."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class QuadratureError(YoungFbmError):
    """Singular quadrature did not reach its tolerance before the level cap."""

    def __init__(self, message, last_values=None):
        super().__init__(message)
        self.last_values = last_values


class PreconditionError(YoungFbmError, ValueError):
    """A bound was requested outside the range where it is proven."""
