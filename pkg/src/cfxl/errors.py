"""Exception types shared across the simulator."""


class SingularityError(ValueError):
    """Raised when a geometric quantity degenerates (zero distance)."""


class NumericalError(ArithmeticError):
    """Raised when a computation produces non-finite or singular values."""


class EvanescentPointError(ValueError):
    """Raised when a wavenumber sample lies outside the propagating disk."""
