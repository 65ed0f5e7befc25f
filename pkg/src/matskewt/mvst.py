"""The matrix-variate skew-t distribution.

A random ``n x p`` matrix is MVST(M, A, Sigma, Psi, nu) when it can be
written ``X = M + W A + sqrt(W) V`` with ``V`` matrix normal
``N(0, Sigma, Psi)`` and ``W`` inverse Gamma ``IG(nu/2, nu/2)``. Integrating
``W`` out gives a closed-form density in terms of two trace forms,

* ``delta = tr(Sigma^-1 (X - M) Psi^-1 (X - M)')``
* ``rho = tr(Sigma^-1 A Psi^-1 A')``

and a Bessel K of order ``-(nu + n p)/2``. Given ``X``, the latent ``W`` is
GIG(rho, delta + nu, -(nu + n p)/2).

When ``rho`` falls below :data:`RHO_MIN` the Bessel argument is effectively
zero; density and latent moments then use the exact ``A = 0`` limit (the
matrix-variate t, with ``W | X`` inverse Gamma).
"""

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import _linalg
from .distributions import (
    GigParams,
    InvGammaParams,
    MatNormParams,
    check_spd,
    gig_expectations,
    invgamma_expectations,
    invgamma_sample,
    matnorm_sample,
)
from .errors import NumericalError, SmallSkewnessError, ValidationError
from .specfun import log_bessel_k, log_gamma

__all__ = [
    "RHO_MIN",
    "MvstParams",
    "MstParams",
    "Dataset",
    "QuadForms",
    "delta_form",
    "rho_form",
    "quad_forms",
    "mvst_log_density",
    "joint_log_density",
    "mvst_sample",
    "conditional_w_given_x",
    "latent_moments",
    "vec_params",
    "mst_log_density",
    "normalize_scale",
]

RHO_MIN = 1e-12
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class MvstParams:
    """Parameters ``(M, A, Sigma, Psi, nu)`` of one MVST distribution.

    Instances are immutable; arrays are copied and validated on construction.
    """

    location: np.ndarray
    skewness: np.ndarray
    row_scale: np.ndarray
    col_scale: np.ndarray
    dof: float

    def __post_init__(self):
        loc = np.array(self.location, dtype=float)
        skew = np.array(self.skewness, dtype=float)
        if loc.ndim != 2:
            raise ValidationError(f"location must be a matrix, got shape {loc.shape}")
        if skew.shape != loc.shape:
            raise ValidationError(f"skewness shape {skew.shape} does not match location {loc.shape}")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(skew))):
            raise ValidationError("location and skewness must be finite")
        n, p = loc.shape
        dof = float(self.dof)
        if not (np.isfinite(dof) and dof > 0):
            raise ValidationError(f"dof must be a positive real, got {self.dof!r}")
        for arr in (loc, skew):
            arr.flags.writeable = False
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "skewness", skew)
        object.__setattr__(self, "row_scale", check_spd(self.row_scale, "row_scale", n))
        object.__setattr__(self, "col_scale", check_spd(self.col_scale, "col_scale", p))
        self.row_scale.flags.writeable = False
        self.col_scale.flags.writeable = False
        object.__setattr__(self, "dof", dof)

    @property
    def shape(self):
        return self.location.shape

    @property
    def has_finite_mean(self):
        return self.dof > 2.0

    @cached_property
    def chol_row(self):
        return _linalg.cholesky(self.row_scale, "row_scale", jitter=False)

    @cached_property
    def chol_col(self):
        return _linalg.cholesky(self.col_scale, "col_scale", jitter=False)

    @cached_property
    def rho(self):
        z = _linalg.whiten(self.chol_row, self.chol_col, self.skewness)
        return float(np.sum(z * z))

    def kron_scale(self):
        """``Psi kron Sigma``, the covariance scale of ``vec(X)``; invariant to the scale split."""
        return np.kron(self.col_scale, self.row_scale)

    def with_updates(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class MstParams:
    """Multivariate skew-t parameters of ``vec(X)``."""

    location: np.ndarray
    skewness: np.ndarray
    scale: np.ndarray
    dof: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """``N`` observed ``n x p`` matrices stored as an ``(N, n, p)`` array."""

    observations: np.ndarray

    def __post_init__(self):
        obs = np.array(self.observations, dtype=float)
        if obs.ndim == 2:
            obs = obs[np.newaxis]
        if obs.ndim != 3:
            raise ValidationError(f"observations must be an (N, n, p) stack, got shape {obs.shape}")
        if obs.shape[0] < 1:
            raise ValidationError("a dataset needs at least one observation")
        if not np.all(np.isfinite(obs)):
            raise ValidationError("observations must be finite")
        obs.flags.writeable = False
        object.__setattr__(self, "observations", obs)

    @property
    def dims(self):
        return self.observations.shape[1:]

    def __len__(self):
        return self.observations.shape[0]

    def __iter__(self):
        return iter(self.observations)


@dataclass(frozen=True)
class QuadForms:
    delta: np.ndarray
    rho: float


def delta_form(X, M, row_scale, col_scale):
    """``tr(Sigma^-1 (X-M) Psi^-1 (X-M)')`` for one matrix or an ``(N, n, p)`` stack."""
    l_row = _linalg.cholesky(row_scale, "row_scale", jitter=False)
    l_col = _linalg.cholesky(col_scale, "col_scale", jitter=False)
    z = _linalg.whiten(l_row, l_col, np.asarray(X, dtype=float) - M)
    out = np.sum(z * z, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def rho_form(A, row_scale, col_scale):
    """``tr(Sigma^-1 A Psi^-1 A')``."""
    return delta_form(A, 0.0, row_scale, col_scale)


def _whitened(X, params):
    X = np.asarray(X, dtype=float)
    if X.shape[-2:] != params.shape or X.ndim not in (2, 3):
        raise ValidationError(f"X has shape {X.shape}, expected (..., {params.shape[0]}, {params.shape[1]})")
    z_resid = _linalg.whiten(params.chol_row, params.chol_col, X - params.location)
    z_skew = _linalg.whiten(params.chol_row, params.chol_col, params.skewness)
    return z_resid, z_skew


def quad_forms(X, params):
    """``QuadForms(delta, rho)``; ``delta`` has one entry per matrix in ``X``."""
    z_resid, _ = _whitened(X, params)
    delta = np.sum(z_resid * z_resid, axis=(-2, -1))
    return QuadForms(delta=delta, rho=params.rho)


def _log_normalizer(params):
    n, p = params.shape
    nu = params.dof
    return (
        0.5 * nu * np.log(0.5 * nu)
        - 0.5 * n * p * LOG_2PI
        - 0.5 * p * _linalg.logdet_from_chol(params.chol_row)
        - 0.5 * n * _linalg.logdet_from_chol(params.chol_col)
        - log_gamma(0.5 * nu)
    )


def mvst_log_density(X, params):
    """Log density of MVST at ``X`` (one matrix or an ``(N, n, p)`` stack).

    Uses the Bessel form when ``rho > RHO_MIN`` and the matrix-variate t
    limit otherwise.

    Raises
    ------
    NumericalError
        If any term is non-finite; the message names the term.
    """
    n, p = params.shape
    nu = params.dof
    z_resid, z_skew = _whitened(X, params)
    delta = np.sum(z_resid * z_resid, axis=(-2, -1))
    cross = np.sum(z_resid * z_skew, axis=(-2, -1))
    rho = params.rho
    shape_half = 0.5 * (nu + n * p)
    b = delta + nu
    terms = {"normalizer": _log_normalizer(params), "cross": cross}
    if rho > RHO_MIN:
        terms["power"] = -0.5 * shape_half * (np.log(b) - np.log(rho))
        terms["bessel"] = np.log(2.0) + log_bessel_k(-shape_half, np.sqrt(rho * b))
    else:
        terms["limit"] = log_gamma(shape_half) - shape_half * np.log(0.5 * b)
    out = 0.0
    for name, value in terms.items():
        if not np.all(np.isfinite(value)):
            raise NumericalError(f"non-finite {name} term in MVST log-density")
        out = out + value
    return float(out) if np.ndim(out) == 0 else out


def joint_log_density(X, w, params):
    """Log of the joint density ``f(X, w) = f(X | w) f(w)`` at a scalar ``w > 0``.

    ``X | w`` is matrix normal ``N(M + wA, w Sigma, Psi)``.
    """
    n, p = params.shape
    nu = params.dof
    z_resid, z_skew = _whitened(X, params)
    z = z_resid - w * z_skew
    quad = np.sum(z * z, axis=(-2, -1))
    return (
        _log_normalizer(params)
        - (0.5 * (nu + n * p) + 1.0) * np.log(w)
        - 0.5 * (quad + nu) / w
    )


def mvst_sample(rng, params, count):
    """Draw ``count`` matrices as ``M + W A + sqrt(W) V``.

    All ``W`` are drawn first, then all ``V``; the output is a deterministic
    function of the generator state.
    """
    if int(count) != count or count < 1:
        raise ValidationError(f"count must be a positive integer, got {count!r}")
    count = int(count)
    n, p = params.shape
    w = invgamma_sample(rng, InvGammaParams(0.5 * params.dof, 0.5 * params.dof), size=count)
    noise = MatNormParams(np.zeros((n, p)), params.row_scale, params.col_scale)
    v = matnorm_sample(rng, noise, size=count)
    x = params.location + w[:, None, None] * params.skewness + np.sqrt(w)[:, None, None] * v
    return Dataset(x)


def conditional_w_given_x(X, params):
    """GIG law of the latent ``W`` given ``X``.

    Returns ``GigParams(a=rho, b=delta + nu, index=-(nu + n p)/2)``; with a
    stack of matrices ``b`` is an array.

    Raises
    ------
    SmallSkewnessError
        When ``rho <= RHO_MIN``; the inverse-Gamma limit applies instead
        (see :func:`latent_moments`).
    """
    n, p = params.shape
    forms = quad_forms(X, params)
    if not forms.rho > RHO_MIN:
        raise SmallSkewnessError(f"rho = {forms.rho:.3g} is below {RHO_MIN:g}")
    return GigParams(a=forms.rho, b=forms.delta + params.dof, index=-0.5 * (params.dof + n * p))


def latent_moments(X, params):
    """``E[W|X]``, ``E[1/W|X]`` and ``E[log W|X]`` for each matrix in ``X``.

    The GIG branch is ``gig_expectations(conditional_w_given_x(X, params))``
    verbatim; below ``RHO_MIN`` the inverse-Gamma limit
    ``IG((nu + n p)/2, (delta + nu)/2)`` is used.
    """
    try:
        law = conditional_w_given_x(X, params)
    except SmallSkewnessError:
        n, p = params.shape
        delta = quad_forms(X, params).delta
        limit = InvGammaParams(0.5 * (params.dof + n * p), 0.5 * (delta + params.dof))
        return invgamma_expectations(limit)
    return gig_expectations(law)


def vec_params(params):
    """Parameters of ``vec(X)`` (column stacking): ``(vec M, vec A, Psi kron Sigma, nu)``."""
    return MstParams(
        location=params.location.ravel(order="F"),
        skewness=params.skewness.ravel(order="F"),
        scale=params.kron_scale(),
        dof=params.dof,
    )


def mst_log_density(x, mst):
    """Multivariate skew-t log density, evaluated as an ``(d, 1)`` MVST."""
    x = np.asarray(x, dtype=float)
    as_matrix = MvstParams(
        location=mst.location[:, None],
        skewness=mst.skewness[:, None],
        row_scale=mst.scale,
        col_scale=np.ones((1, 1)),
        dof=mst.dof,
    )
    return mvst_log_density(x[..., None], as_matrix)


def normalize_scale(params):
    """Rescale so that ``tr(Sigma) = n``; ``Psi`` absorbs the inverse factor.

    The density and ``Psi kron Sigma`` are unchanged.
    """
    n = params.shape[0]
    factor = n / float(np.trace(params.row_scale))
    if factor == 1.0:
        return params
    return params.with_updates(row_scale=params.row_scale * factor, col_scale=params.col_scale / factor)
