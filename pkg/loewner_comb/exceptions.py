"""Module defining custom exceptions."""


class LoewnerCombError(Exception):
    """Base error class for exceptions raised by the loewner-comb library."""

    def __init__(self, message=None):
        """All loewner-comb errors have a message field."""
        super().__init__(message)
        self.message = message


class LoewnerCombValueError(LoewnerCombError):
    """Input was incorrect for the routine."""


class BranchCutError(LoewnerCombValueError):
    """A slit map was evaluated on its branch cut."""


class ContourError(LoewnerCombError):
    """Contour quadrature did not normalise or did not stabilise."""


class NormalizationViolated(LoewnerCombError):
    """Moments of a Loewner chain measure do not have mean 0 and variance t."""


class HullAbsorbed(LoewnerCombError):
    """A forward trajectory reached the hull before the requested time."""


class StepLimitExceeded(LoewnerCombError):
    """The ODE integrator used more steps than allowed."""


class InfeasibleResolution(LoewnerCombError):
    """The driver bound is too large for the requested resolution."""


class NegativeDriver(LoewnerCombError):
    """A sampled driving function value is negative."""


class InfeasibleSpec(LoewnerCombError):
    """Spidernet data cannot be realised."""


class TruncationTooShallow(LoewnerCombError):
    """A truncated graph cannot give exact moments of the requested order."""
