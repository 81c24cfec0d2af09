"""Exception types shared across the package."""


class GWishartError(Exception):
    """Base class for all package errors."""


class DomainError(GWishartError, ValueError):
    """An argument lies outside the domain of the function."""


class ConvergenceError(GWishartError, ArithmeticError):
    """A series or iteration failed to converge."""


class ToleranceNotReached(GWishartError, ArithmeticError):
    """Adaptive quadrature ran out of subdivisions.

    The best available value and error estimate are attached.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class NonRealResult(GWishartError, ArithmeticError):
    """An integral that must be real came back with a large imaginary part."""


class DimensionTooHigh(GWishartError):
    """The requested integral has more free dimensions than supported."""


class NotChordal(GWishartError, ValueError):
    """A chordal graph was required."""


class CholeskyFailure(GWishartError, ArithmeticError):
    """A principal submatrix is not positive definite."""


class Intractable(GWishartError):
    """No exact or low-dimensional route covers this graph."""


class DegenerateWeights(UserWarning):
    """Importance weights collapsed onto very few samples."""
