"""Exception hierarchy shared by the library and the CLI."""


class CtrlCommError(Exception):
    """Base class for all errors raised by ctrlcomm."""


class InvalidInputError(CtrlCommError, ValueError):
    """Malformed numeric input: wrong shape, NaN/Inf, asymmetric where symmetric is required."""


class PreconditionError(CtrlCommError, ValueError):
    pass


class InfeasibleError(CtrlCommError):
    """The target cannot be realized by a single round protocol through the given map."""


class UnsupportedRepresentationError(CtrlCommError):
    pass


class TreeConstructionError(CtrlCommError):
    """A partition cannot be resolved by any deterministic bit exchange."""


class DecodeError(CtrlCommError):
    """An observation quantizer failed to separate the two bit states."""
