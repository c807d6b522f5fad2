"""Exception types raised across the package."""


class DomainError(ValueError):
    """A utility or delay was evaluated outside its domain.

    ``dimension`` (and ``node`` where relevant) point at the offending entry.
    """

    def __init__(self, message, dimension=None, node=None):
        super().__init__(message)
        self.dimension = dimension
        self.node = node


class InfeasibleSpaceError(ValueError):
    """A strategy space has an empty feasible region."""


class BoundUnavailableError(ValueError):
    """A perturbation bound needs a positive constant that is not available."""


class InstabilityError(DomainError):
    """A queue in a Jackson network is at (or past) its stability limit."""


class ConvergenceError(RuntimeError):
    """An inner iteration failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GridCapError(ValueError):
    """Raised when a brute-force grid would exceed its size cap."""
