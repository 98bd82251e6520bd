"""Module defining errors raised by the convergence harness."""

from loewner_comb.exceptions import LoewnerCombError

HARNESS_NAME = 'loewner-comb'


class HarnessError(LoewnerCombError):
    """Base harness exception."""


class InvalidConfigError(HarnessError):
    """Pipeline configuration could not be used as presented."""


class ReferenceFailure(HarnessError):
    """Reference moments of the continuous chain could not be computed."""


class ReportWriteError(HarnessError):
    """A report file could not be written."""
