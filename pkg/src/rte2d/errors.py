"""Exception types shared across the solver."""


class MeshError(Exception):
    """Invalid mesh topology or geometry (nonconforming, degenerate element, ...)."""


class StabilityError(Exception):
    """A local element system is singular or too ill-conditioned to solve."""

    def __init__(self, message, element=None, direction=None):
        super().__init__(message)
        self.element = element
        self.direction = direction


class SweepCycleError(Exception):
    """Dependency cycle found while ordering elements for a transport sweep."""

    def __init__(self, message, elements=()):
        super().__init__(message)
        self.elements = list(elements)


class NonConvergenceError(Exception):
    """Source iteration failed to reach the requested tolerance."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class AssumptionError(Exception):
    """A coercivity assumption on the cross sections is violated."""
