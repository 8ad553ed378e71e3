"""Exception types shared across the toolkit."""


class LemlabError(Exception):
    """Base class for all toolkit errors."""


class PoleAtZ(LemlabError):
    """Denominator of a logarithmic derivative vanished at the query point."""


class OriginInput(LemlabError):
    """z = 0 passed where the normalized distance function is undefined."""


class BadParameter(LemlabError):
    """Family or check parameters outside their documented range."""


class NoConvergence(LemlabError):
    """Root iteration exhausted without meeting the residual target."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TransversalityFailure(LemlabError):
    """Radial arclength integrand sampled too close to a tangency."""


class BudgetExceeded(LemlabError):
    """Refinement depth exhausted without meeting tolerance.

    Carries the partial result in ``.result`` so callers can degrade gracefully.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class HomotopyStall(LemlabError):
    """Level continuation toward the target sublevel curve stopped making progress."""


class StalledTrace(LemlabError):
    """Predictor-corrector could not continue a component (near a critical point)."""


class BadSector(LemlabError):
    """Sector lower bound called with arguments not confined to the stated arc."""


class ConfigError(LemlabError):
    """Malformed CLI configuration or input file."""
