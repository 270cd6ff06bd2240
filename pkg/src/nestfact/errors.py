"""Exception hierarchy.

Every numerical failure raised by the library derives from
:class:`NumericalError`; configuration and shape problems derive from
:class:`NestFactError` directly. The CLI maps the two families to different
exit codes.
"""


class NestFactError(Exception):
    pass


class DimensionMismatch(NestFactError, ValueError):
    pass


class NonSquare(DimensionMismatch):
    pass


class NonFinite(NestFactError, ValueError):
    pass


class ZeroDimension(NestFactError, ValueError):
    pass


class PartitionNotOnGrid(NestFactError, ValueError):
    pass


class GridMismatch(NestFactError, ValueError):
    pass


class CflViolation(NestFactError, ValueError):
    pass


class HorizonTooShort(NestFactError, ValueError):
    pass


class NumericalError(NestFactError, ArithmeticError):
    pass


class AsymmetricInput(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class ZeroOperator(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class RankDeficientDiagonal(RankDeficient):
    """The diagonal has no dense range, so ``Phi*`` is not an isometry."""


class DiagonalCollapse(NumericalError):
    """The diagonal vanished numerically (compact-operator regime)."""


class EmptyMask(NumericalError):
    pass
