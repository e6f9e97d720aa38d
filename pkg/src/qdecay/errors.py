"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, any
NumericalBudgetError subclass -> 3.
"""


class QDecayError(Exception):
    """Base class for all package errors."""


class InvalidParamsError(QDecayError, ValueError):
    """Parameter set violates a model invariant (s<=0, negative coupling, ...)."""


class SingularPointError(QDecayError, ValueError):
    """Evaluation requested exactly at a non-integrable / undefined point."""


class RegimeError(QDecayError, ValueError):
    """Operation called outside the s-range where its formula is defined."""


class PerturbativeRegimeError(QDecayError, ValueError):
    """No core/tail border exists: first-order theory is globally valid."""


class NoCrossingError(QDecayError, ValueError):
    """The two closed-form decay branches do not intersect in the search window."""


class ConfigError(QDecayError, ValueError):
    """One or more configuration keys failed validation (messages lists all)."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalBudgetError(QDecayError, RuntimeError):
    """Base for runtime accuracy-budget violations."""


class BudgetExceededError(NumericalBudgetError):
    """Integrator norm defect exceeded the requested unitarity budget."""


class WindowOverflowError(NumericalBudgetError):
    """Self-expanding window hit the realization's half_size."""


class StepTooLargeError(NumericalBudgetError):
    """Requested step exceeds the resolution limit of the kernel solver."""


class NegativeRadicandError(NumericalBudgetError):
    """Closed-form spread radicand went negative (derivative stencil too coarse)."""


class WindowTooShortError(QDecayError, ValueError):
    """Fit window spans less than half a decade."""


class NoPlateauError(QDecayError, ValueError):
    """Track does not level off within its final decade."""


class InsufficientOverlapError(QDecayError, ValueError):
    """Rescaled tracks share too little common support for a collapse."""
