"""Exception hierarchy shared by every module."""


class PointerLabError(Exception):
    """Base class for all errors raised by pointerlab."""


class InvalidArgumentError(PointerLabError, ValueError):
    """An input violates an operation's precondition."""


class CapacityError(InvalidArgumentError):
    """A requested system size exceeds the dense-simulation bound."""


class NumericFailureError(PointerLabError, ArithmeticError):
    """A numerical result left its admissible range.

    ``time`` carries the offending grid time when one is known.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class TruncationError(NumericFailureError):
    """A truncated Hilbert space is too small for the requested state."""


class PointerBrokenError(NumericFailureError):
    """A pointer candidate entangles above tolerance at some grid time."""


class EmptyProfileError(NumericFailureError):
    """No environment index survived the ratio-profile weight floor."""


class DegenerateBranchError(PointerLabError):
    """The |b> branch vanishes while the |a> branch does not.

    The pointer state is then the bare basis state |a>.
    """
