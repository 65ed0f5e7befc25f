"""Exception hierarchy shared by every module.

The CLI maps each family onto an exit code: validation problems exit with 2,
numerical failures with 3 and file-system problems with 4.
"""


class MatSkewTError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(MatSkewTError, ValueError):
    """Inputs violate a documented precondition (shapes, SPD scales, bounds)."""


class DomainError(ValidationError):
    """Argument outside the domain of a special function."""


class NumericalError(MatSkewTError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""


class FactorizationError(NumericalError):
    """Cholesky factorization failed even after the jitter retry.

    Attributes
    ----------
    which : str
        Name of the matrix that could not be factorized.
    """

    def __init__(self, which, message=None):
        self.which = which
        super().__init__(message or f"{which} is not positive definite")


class SmallSkewnessError(NumericalError):
    """Skewness form rho fell below the threshold for the Bessel branch.

    Callers should switch to the inverse-Gamma (matrix-variate t) limit.
    """


class DegenerateWeightsError(NumericalError):
    """The location/skewness update denominator vanished."""


class FitError(NumericalError):
    """An ECM iteration failed.

    Attributes
    ----------
    iteration : int
        One-based iteration index at which the failure happened.
    last_params : MvstParams or None
        Last parameter set that was fully valid.
    """

    def __init__(self, message, iteration, last_params=None):
        self.iteration = iteration
        self.last_params = last_params
        super().__init__(f"iteration {iteration}: {message}")
