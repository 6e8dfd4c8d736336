"""Exception hierarchy shared by all tbosim modules."""

from __future__ import annotations


class TBOSimError(Exception):
    """Base class for every error raised by tbosim."""


class InvalidObservable(TBOSimError, ValueError):
    """A matrix failed one of the traceless-binary-observable checks."""


class NotHermitian(InvalidObservable):
    pass


class NotTraceless(InvalidObservable):
    pass


class NotInvolutory(InvalidObservable):
    pass


class OddDimension(InvalidObservable):
    pass


class DimensionMismatch(TBOSimError, ValueError):
    pass


class AllZeroCoefficients(TBOSimError, ValueError):
    pass


class NotNormalized(TBOSimError, ValueError):
    pass


class NegativeDimension(TBOSimError, ValueError):
    pass


class NonpositiveDimension(TBOSimError, ValueError):
    pass


class OutOfRange(TBOSimError, ValueError):
    pass


class ZeroVector(TBOSimError, ArithmeticError):
    pass


class IterationCap(TBOSimError, RuntimeError):
    """Rejection loop ran past its iteration budget."""


class MalformedBits(TBOSimError, ValueError):
    pass


class ConfigInvalid(TBOSimError, ValueError):
    pass


class NotMaximallyEntangled(TBOSimError, ValueError):
    pass
