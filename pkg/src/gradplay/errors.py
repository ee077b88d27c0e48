"""Exception types shared across the package."""


class GradplayError(Exception):
    """Base class for domain errors raised by this package."""


class NotStronglyMonotoneError(GradplayError):
    """The game mapping is not strongly monotone (smallest symmetric-part eigenvalue <= 0)."""


class DisconnectedGraphError(GradplayError):
    """Operation requires a connected communication graph."""


class PerfectMixingError(GradplayError):
    """sigma = 0 (perfect mixing): the step-size ceiling terms degenerate."""


class InadmissibleStepSizeError(GradplayError):
    """Step size outside (0, alpha_max): geometric contraction is not certified."""


class DivergenceError(GradplayError):
    """Iterate distance blew past the divergence guard; step size too large."""
