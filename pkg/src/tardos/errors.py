"""Exception hierarchy shared across the package."""


class TardosError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(TardosError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class BracketError(TardosError, ValueError):
    """Root-finding endpoints do not bracket a sign change."""


class InfeasibleCandidateError(TardosError, ArithmeticError):
    """A closed-form parameter candidate produced a non-finite or invalid value."""


class NotAsymptoticError(TardosError, ValueError):
    """The asymptotic formulas are meaningless for the given coalition size."""


class AdjustmentError(TardosError, ArithmeticError):
    """The integral-codelength adjustment has no real solution."""


class InvalidCutoffError(TardosError, ValueError):
    """The derived cutoff does not lie in (0, 1/2)."""


class CapacityError(TardosError, MemoryError):
    """A codebook would exceed the configured memory budget."""


class CodebookFormatError(TardosError, ValueError):
    """A serialized codebook is malformed or fails its integrity check."""


class InfeasibleParamsError(TardosError, ValueError):
    """A parameter set violates the soundness/completeness constraints."""


class ImplicationViolation(TardosError, AssertionError):
    """A coalition scored above c*Z yet none of its members was accused."""
