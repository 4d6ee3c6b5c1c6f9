"""Exception hierarchy shared by all modules."""


class TumorStripError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(TumorStripError, ValueError):
    pass


class NonPositiveParameter(ParameterError):
    pass


class AlphaOutOfRange(ParameterError):
    """Raised when (sigma_bar_1 + sigma_bar_2) / sigma_tilde <= 2.

    Without this condition there is no flat stationary state.
    """


class NonPositiveProfile(TumorStripError, ValueError):
    pass


class GridMismatch(TumorStripError, ValueError):
    pass


class DomainError(TumorStripError, ValueError):
    pass


class BracketNotFound(TumorStripError, RuntimeError):
    pass


class SingularSystem(TumorStripError, RuntimeError):
    pass


class PinchOff(TumorStripError, RuntimeError):
    """The boundary came too close to the substrate to keep solving."""


class ToleranceNotReached(TumorStripError, RuntimeError):
    pass


class StepRejected(TumorStripError, RuntimeError):
    pass


class WindowTooShort(TumorStripError, ValueError):
    pass


class AmplitudeUnderflow(TumorStripError, ValueError):
    pass
