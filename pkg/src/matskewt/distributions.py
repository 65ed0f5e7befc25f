"""Building blocks: matrix normal, inverse Gamma and GIG laws.

Matrices are dense ``float64`` arrays. Scale matrices are always handled
through their lower Cholesky factors; nothing here inverts an unfactored
matrix.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _linalg
from .errors import DomainError, ValidationError
from .specfun import digamma, dlog_bessel_k_dorder, log_bessel_k, log_gamma

__all__ = [
    "MatNormParams",
    "InvGammaParams",
    "GigParams",
    "GigMoments",
    "check_spd",
    "matnorm_log_density",
    "matnorm_sample",
    "invgamma_log_density",
    "invgamma_sample",
    "invgamma_expectations",
    "gig_log_density",
    "gig_expectations",
]

LOG_2PI = np.log(2.0 * np.pi)


def check_spd(mat, name, dim=None):
    """Validate a symmetric positive-definite matrix and return it as float64."""
    mat = np.array(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {mat.shape}")
    if dim is not None and mat.shape[0] != dim:
        raise ValidationError(f"{name} must be {dim}x{dim}, got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-12 * scale:
        raise ValidationError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{name} is not positive definite") from None
    return mat


@dataclass(frozen=True, eq=False)
class MatNormParams:
    """Matrix normal parameters: location ``M`` (n x p), row scale ``Sigma``
    (n x n) and column scale ``Psi`` (p x p)."""

    location: np.ndarray
    row_scale: np.ndarray
    col_scale: np.ndarray

    def __post_init__(self):
        loc = np.array(self.location, dtype=float)
        if loc.ndim != 2:
            raise ValidationError(f"location must be a matrix, got shape {loc.shape}")
        n, p = loc.shape
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "row_scale", check_spd(self.row_scale, "row_scale", n))
        object.__setattr__(self, "col_scale", check_spd(self.col_scale, "col_scale", p))

    @property
    def shape(self):
        return self.location.shape

    @cached_property
    def chol_row(self):
        return _linalg.cholesky(self.row_scale, "row_scale", jitter=False)

    @cached_property
    def chol_col(self):
        return _linalg.cholesky(self.col_scale, "col_scale", jitter=False)


@dataclass(frozen=True)
class InvGammaParams:
    """Inverse Gamma law with density ``beta^alpha / Gamma(alpha) x^{-alpha-1} exp(-beta/x)``."""

    shape: float
    rate_like: float

    def __post_init__(self):
        for name in ("shape", "rate_like"):
            value = np.asarray(getattr(self, name), dtype=float)
            if not (np.all(np.isfinite(value)) and np.all(value > 0)):
                raise ValidationError(f"inverse Gamma {name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True, eq=False)
class GigParams:
    """Generalized inverse Gaussian law.

    Density ``(a/b)^{index/2} y^{index-1} / (2 K_index(sqrt(ab))) exp(-(a y + b/y)/2)``.
    ``a`` and ``b`` may be arrays of a common shape (one law per entry, all
    sharing ``index``); this is how the E-step evaluates every observation in
    one call.
    """

    a: np.ndarray
    b: np.ndarray
    index: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if not (np.all(np.isfinite(a)) and np.all(a > 0)):
            raise ValidationError("GIG parameter a must be finite and > 0")
        if not (np.all(np.isfinite(b)) and np.all(b > 0)):
            raise ValidationError("GIG parameter b must be finite and > 0")
        if not np.isfinite(self.index):
            raise ValidationError("GIG index must be finite")
        object.__setattr__(self, "a", a[()] if a.ndim == 0 else a)
        object.__setattr__(self, "b", b[()] if b.ndim == 0 else b)
        object.__setattr__(self, "index", float(self.index))


@dataclass(frozen=True)
class GigMoments:
    """``E[Y]``, ``E[1/Y]`` and ``E[log Y]`` (scalars or arrays)."""

    mean: np.ndarray
    mean_reciprocal: np.ndarray
    mean_log: np.ndarray


def matnorm_log_density(X, params):
    """Log density of the matrix normal law at ``X``.

    Examples
    --------
    >>> import numpy as np
    >>> p = MatNormParams(np.zeros((2, 2)), np.eye(2), np.eye(2))
    >>> round(matnorm_log_density(np.zeros((2, 2)), p), 6)
    -3.675754
    """
    X = np.asarray(X, dtype=float)
    if X.shape != params.shape:
        raise ValidationError(f"X has shape {X.shape}, expected {params.shape}")
    n, p = params.shape
    z = _linalg.whiten(params.chol_row, params.chol_col, X - params.location)
    quad = float(np.sum(z * z))
    return (
        -0.5 * n * p * LOG_2PI
        - 0.5 * p * _linalg.logdet_from_chol(params.chol_row)
        - 0.5 * n * _linalg.logdet_from_chol(params.chol_col)
        - 0.5 * quad
    )


def matnorm_sample(rng, params, size=None):
    """Draw ``M + L_Sigma Z L_Psi^T`` with ``Z`` standard normal.

    Returns one ``(n, p)`` matrix, or a ``(size, n, p)`` stack when ``size``
    is given.
    """
    n, p = params.shape
    shape = (n, p) if size is None else (size, n, p)
    z = rng.standard_normal(shape)
    return params.location + params.chol_row @ z @ params.chol_col.T


def invgamma_log_density(x, params):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("inverse Gamma density requires x > 0")
    alpha, beta = params.shape, params.rate_like
    return alpha * np.log(beta) - log_gamma(alpha) - (alpha + 1.0) * np.log(x) - beta / x


def invgamma_sample(rng, params, size=None):
    """Inverse Gamma draw(s), taken as reciprocals of Gamma(shape, rate) draws."""
    return 1.0 / rng.gamma(params.shape, 1.0 / params.rate_like, size=size)


def invgamma_expectations(params):
    """``E[W]``, ``E[1/W]``, ``E[log W]`` for an inverse Gamma law.

    ``E[W]`` is infinite when ``shape <= 1``.
    """
    alpha = np.asarray(params.shape, dtype=float)
    beta = np.asarray(params.rate_like, dtype=float)
    with np.errstate(divide="ignore"):
        mean = np.where(alpha > 1.0, beta / np.maximum(alpha - 1.0, 0.0), np.inf)
    return GigMoments(
        mean=mean[()] if mean.ndim == 0 else mean,
        mean_reciprocal=alpha / beta,
        mean_log=np.log(beta) - digamma(alpha),
    )


def gig_log_density(y, params):
    """Log GIG density at ``y > 0``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise DomainError("GIG density requires finite y > 0")
    a, b, lam = params.a, params.b, params.index
    out = (
        0.5 * lam * (np.log(a) - np.log(b))
        + (lam - 1.0) * np.log(y)
        - np.log(2.0)
        - log_bessel_k(lam, np.sqrt(a * b))
        - 0.5 * (a * y + b / y)
    )
    return float(out) if np.ndim(out) == 0 else out


def gig_expectations(params):
    """Closed-form ``E[Y]``, ``E[1/Y]`` and ``E[log Y]`` of a GIG law.

    With ``x = sqrt(ab)`` and ``R = K_{index+1}(x) / K_index(x)``::

        E[Y]     = sqrt(b/a) R
        E[1/Y]   = sqrt(a/b) R - 2 index / b
        E[log Y] = log sqrt(b/a) + d/d(index) log K_index(x)

    The Bessel ratio is formed as the exponential of a log difference.
    """
    a, b, lam = params.a, params.b, params.index
    x = np.sqrt(a * b)
    log_ratio = log_bessel_k(lam + 1.0, x) - log_bessel_k(lam, x)
    half_log_ba = 0.5 * (np.log(b) - np.log(a))
    mean = np.exp(half_log_ba + log_ratio)
    mean_reciprocal = np.exp(log_ratio - half_log_ba) - 2.0 * lam / b
    mean_log = half_log_ba + dlog_bessel_k_dorder(lam, x)
    return GigMoments(mean=mean, mean_reciprocal=mean_reciprocal, mean_log=mean_log)
