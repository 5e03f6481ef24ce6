"""Exception types shared across the package."""


class EllipseFusionError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(EllipseFusionError, ValueError):
    """Malformed or non-finite input, or a violated type invariant."""


class IndefiniteMatrixError(EllipseFusionError, ValueError):
    """A matrix that must be positive semidefinite has a negative
    eigenvalue beyond tolerance."""


class JacobianSingularError(EllipseFusionError, ArithmeticError):
    """The square-root-space transform has no usable Jacobian at the
    requested state (equal semi-axes or a vanishing semi-axis)."""


class FusionNumericsError(EllipseFusionError, ArithmeticError):
    """A fusion step failed numerically, e.g. the combined covariance is
    singular in a direction where the two estimates disagree."""
