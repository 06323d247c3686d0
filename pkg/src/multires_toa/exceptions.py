"""Exception types raised by the library."""


class MultiresToaError(Exception):
    """Base class for all library errors."""


class ValidationError(MultiresToaError, ValueError):
    """An input violates a documented invariant."""


class ConfigError(MultiresToaError, ValueError):
    """A configuration document could not be parsed."""


class DegenerateGeometryError(MultiresToaError, ArithmeticError):
    """The subspace geometry is too ill-conditioned to estimate from.

    Raised for rank-deficient selection submatrices, defective invariance
    matrices and similar situations where the estimate would be meaningless.
    """


class RankDeficiencyError(MultiresToaError, ArithmeticError):
    """A Fisher information or model matrix is singular."""


class CycleSlipError(MultiresToaError, ArithmeticError):
    """Integer cycle rounding had too little margin to be trusted."""
