"""Cholesky-based helpers and order-independent reductions."""

import logging
import math

import numpy as np
from scipy.linalg import solve_triangular

from .errors import FactorizationError

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-10


def cholesky(mat, name="matrix", jitter=True):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    On failure, and when ``jitter`` is set, a single retry adds
    ``1e-10 * tr(mat) / dim`` to the diagonal. A second failure raises.
    """
    mat = np.asarray(mat, dtype=float)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        if not jitter:
            raise FactorizationError(name) from None
    dim = mat.shape[0]
    bump = JITTER_SCALE * np.trace(mat) / dim
    if not np.isfinite(bump) or bump <= 0:
        raise FactorizationError(name, f"{name} is not positive definite (trace {np.trace(mat)!r})")
    logger.warning("%s not positive definite; retrying with diagonal jitter %.3g", name, bump)
    try:
        return np.linalg.cholesky(mat + bump * np.eye(dim))
    except np.linalg.LinAlgError:
        raise FactorizationError(name, f"{name} is not positive definite after jitter") from None


def logdet_from_chol(chol):
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def whiten(chol_row, chol_col, mat):
    """Return ``L_row^{-1} mat L_col^{-T}`` for a single matrix or a stack."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim == 2:
        left = solve_triangular(chol_row, mat, lower=True)
        return solve_triangular(chol_col, left.T, lower=True).T
    # stacked (N, n, p): move the stack into columns so each solve is one call
    N, n, p = mat.shape
    left = solve_triangular(chol_row, mat.transpose(1, 0, 2).reshape(n, N * p), lower=True)
    left = left.reshape(n, N, p).transpose(1, 0, 2)
    right = solve_triangular(chol_col, left.transpose(2, 1, 0).reshape(p, n * N), lower=True)
    return right.reshape(p, n, N).transpose(2, 1, 0)


def inv_from_chol(chol):
    dim = chol.shape[0]
    linv = solve_triangular(chol, np.eye(dim), lower=True)
    inv = linv.T @ linv
    return 0.5 * (inv + inv.T)


def exact_sum(values, axis=0):
    """Correctly rounded sum along ``axis``.

    ``math.fsum`` is exact, so the result does not depend on the order of the
    summands; reductions over observations use it to stay reproducible under
    permutation and under any parallel schedule.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return math.fsum(values)
    moved = np.moveaxis(values, axis, -1)
    flat = moved.reshape(-1, moved.shape[-1])
    out = np.fromiter((math.fsum(row) for row in flat), dtype=float, count=flat.shape[0])
    return out.reshape(moved.shape[:-1])


def ensure_spd(mat, name="matrix"):
    """Symmetrize ``mat`` and return it, jittered once if Cholesky fails.

    The returned matrix is guaranteed to factorize; a second failure raises
    :class:`FactorizationError`.
    """
    mat = np.asarray(mat, dtype=float)
    mat = 0.5 * (mat + mat.T)
    if not np.all(np.isfinite(mat)):
        raise FactorizationError(name, f"{name} has non-finite entries")
    try:
        np.linalg.cholesky(mat)
        return mat
    except np.linalg.LinAlgError:
        pass
    dim = mat.shape[0]
    bump = JITTER_SCALE * np.trace(mat) / dim
    if not bump > 0:
        raise FactorizationError(name, f"{name} is not positive definite (trace {np.trace(mat)!r})")
    logger.warning("%s not positive definite; adding diagonal jitter %.3g", name, bump)
    jittered = mat + bump * np.eye(dim)
    try:
        np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError:
        raise FactorizationError(name, f"{name} is not positive definite after jitter") from None
    return jittered
