"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Bad input: out-of-range index, mismatched dimensions, non-finite data."""


class InvalidPairingError(ValueError):
    """Two solutions that cannot be combined (different eps, off-shell pair)."""


class ConditioningError(ArithmeticError):
    """A linear solve was too ill-conditioned to trust.

    Attributes
    ----------
    condition : float
        Estimated condition number (``inf`` if the factorization broke down).
    eps : float or None
        Adiabatic parameter of the failing solve.
    fredholm : complex or None
        Fredholm determinant of the incident channel, when known.
    """

    def __init__(self, message, condition=float("inf"), eps=None, fredholm=None):
        super().__init__(message)
        self.condition = condition
        self.eps = eps
        self.fredholm = fredholm


class NearZeroFredholmError(ConditioningError):
    """The rank-1 Fredholm determinant vanishes to working precision."""
