"""Error types shared across the package.

Each class maps to one failure mode a caller can reasonably branch on.
Everything derives from ValueError so sloppy callers still get a loud crash.
"""


class InvalidParameterError(ValueError):
    """A scalar argument is out of its allowed range."""


class OutOfWindowError(ValueError):
    """A query rectangle or point is not contained in the field window."""


class WindowTooSmallError(ValueError):
    """The field window does not cover the corridor needed for a computation.

    Carries the window that would have been sufficient so the caller can
    regenerate a larger field and retry.
    """

    def __init__(self, message, required_window=None):
        super().__init__(message)
        self.required_window = required_window


class CorridorEscapeError(ValueError):
    """The optimal path kept hugging the corridor wall after the maximum
    number of widenings."""


class OracleCapacityError(ValueError):
    """Too many points for exhaustive enumeration."""


class InvalidPathError(ValueError):
    """A broken path violates time ordering or does not match its field."""


class InvalidPairingError(ValueError):
    """Two objects that must share a seed or a slope do not."""


class InvalidInitialConditionError(ValueError):
    """An initial potential is incompatible with the requested slope."""


class HorizonInsufficientError(ValueError):
    """A quantity that needs coalescence or slice stabilization could not be
    certified within the allowed horizon ladder."""
