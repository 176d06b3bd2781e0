"""Exception types raised by modalflow."""


class ModalflowError(Exception):
    """Base class for all library errors."""


class InputError(ModalflowError, ValueError):
    """Invalid argument: dimension mismatch, bad parameter, violated precondition."""


class ProjectionFailed(ModalflowError):
    """Newton iteration for a level-set projection did not converge.

    ``last_iterate`` carries the final iterate so callers can inspect it and
    retry with a smaller step.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class GridTooSmall(ModalflowError):
    """The grid boundary shell intersects the upper level set."""


class ArgmaxFailed(ModalflowError):
    """Every ascent started inside a component stalled away from a mode."""


class StepFailed(ModalflowError):
    """An implicit (backward Euler) step did not converge."""


class RateExperimentError(ModalflowError):
    """A climb inside a rate experiment returned a mode other than the reference."""
