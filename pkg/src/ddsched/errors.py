"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to reach its accuracy target."""


class QuadratureError(NumericalError):
    """Adaptive quadrature could not meet its error budget."""
