"""Exception and warning types raised by :mod:`scbcs`."""


class SCBCSError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SCBCSError, ValueError):
    pass


class OutOfBounds(SCBCSError, IndexError):
    pass


class MissingBlock(SCBCSError, KeyError):
    pass


class InvalidOrder(SCBCSError, ValueError):
    pass


class InvalidShape(SCBCSError, ValueError):
    pass


class InvalidLength(SCBCSError, ValueError):
    pass


class TooSmall(SCBCSError, ValueError):
    pass


class WrongMatrixKind(SCBCSError, ValueError):
    pass


class FormatError(SCBCSError, ValueError):
    """Malformed PGM or measurement file."""


class InfeasibleConstraints(SCBCSError, RuntimeError):
    """Border balls and the measurement set have no common point."""


class NotConverged(RuntimeWarning):
    """Solver hit its iteration cap; the returned block is still usable."""
