"""Exception types raised across the package."""


class ConcealmentError(Exception):
    """Base class for every error raised by :mod:`bregconceal`."""


class DimensionMismatchError(ConcealmentError, ValueError):
    """Arrays that must share a shape do not."""


class DomainError(ConcealmentError, ValueError):
    """An argument lies outside the domain of a function."""


class SingularDiagonalError(ConcealmentError, ArithmeticError):
    """A Jacobian diagonal entry vanished during a Gauss-Seidel sweep.

    This happens when ``alpha == 0`` and a cell carries no data weight.
    """


class SingularSystemError(ConcealmentError, ArithmeticError):
    """A dense linear system could not be solved."""


class DegenerateSystemError(ConcealmentError, ArithmeticError):
    """The 2x2 normal equations of an observation window are ill-posed."""


class FormatError(ConcealmentError, ValueError):
    """Base for malformed input files."""


class MalformedHeaderError(FormatError):
    pass


class TruncatedDataError(FormatError):
    pass


class FrameIndexError(ConcealmentError, IndexError):
    pass
