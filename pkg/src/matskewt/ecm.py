"""Maximum-likelihood fitting of MVST parameters by ECM.

One iteration:

1. E-step: ``a_i = E[W_i|X_i]``, ``b_i = E[1/W_i|X_i]``, ``c_i = E[log W_i|X_i]``
   from the GIG conditional law.
2. CM-1: closed-form ``M`` and ``A``; ``nu`` as the root of
   ``log(nu/2) + 1 - digamma(nu/2) = mean(b_i + c_i)``.
3. CM-2: ``Sigma`` given the new ``M, A`` and the current ``Psi``.
4. CM-3: ``Psi`` given the new ``Sigma``.

Iteration stops when the Aitken-extrapolated log-likelihood is within
``epsilon`` of the current value (and not below it), or after
``max_iterations``. Every reduction over observations is an exactly rounded
sum, so results do not depend on the order of the data.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize

from . import _linalg
from .errors import (
    DegenerateWeightsError,
    DomainError,
    FitError,
    MatSkewTError,
    NumericalError,
    ValidationError,
)
from .mvst import RHO_MIN, Dataset, MvstParams, latent_moments, mvst_log_density, normalize_scale, quad_forms
from .specfun import digamma

logger = logging.getLogger(__name__)

__all__ = [
    "EStepStats",
    "FitConfig",
    "FitResult",
    "NuSolution",
    "AitkenResult",
    "e_step",
    "cm_update_location_skewness",
    "nu_equation_lhs",
    "solve_nu",
    "cm_update_row_scale",
    "cm_update_col_scale",
    "observed_loglik",
    "aitken_check",
    "init_params",
    "fit",
]

DENOMINATOR_MIN = 1e-10
INIT_STRATEGIES = ("moment", "provided")


@dataclass(frozen=True, eq=False)
class EStepStats:
    """Per-observation latent expectations and the shared GIG index."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    bessel_arg: np.ndarray
    gig_index: float


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit`.

    ``seed`` is carried for reproducible bookkeeping; both initialization
    strategies are deterministic functions of the data.
    """

    max_iterations: int = 1000
    epsilon: float = 1e-6
    nu_bounds: tuple = (0.5, 200.0)
    seed: int = 0
    init_strategy: str = "moment"
    initial_params: Optional[MvstParams] = None

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValidationError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon!r}")
        low, high = self.nu_bounds
        if not (0 < low < high and np.isfinite(high)):
            raise ValidationError(f"nu_bounds must satisfy 0 < low < high < inf, got {self.nu_bounds!r}")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValidationError(f"init_strategy must be one of {INIT_STRATEGIES}, got {self.init_strategy!r}")
        if self.init_strategy == "provided" and self.initial_params is None:
            raise ValidationError("init_strategy 'provided' needs initial_params")
        object.__setattr__(self, "nu_bounds", (float(low), float(high)))


@dataclass(eq=False)
class FitResult:
    """Outcome of :func:`fit`.

    ``loglik_trace[k]`` is the log-likelihood after iteration ``k + 1``;
    ``initial_loglik`` is the value at the starting parameters.
    """

    params: MvstParams
    loglik_trace: list
    iterations: int
    converged: bool
    aitken_history: list = field(default_factory=list)
    initial_loglik: float = float("nan")
    nu_clamped: int = 0


class NuSolution(NamedTuple):
    nu: float
    clamped: bool


class AitkenResult(NamedTuple):
    converged: bool
    a_t: float
    l_inf: float


def e_step(data, params):
    """Latent expectations for every observation.

    Routes through :func:`matskewt.mvst.latent_moments`, i.e. the GIG
    expectations of the conditional law of ``W`` given ``X``.
    """
    obs = data.observations
    n, p = params.shape
    try:
        moments = latent_moments(obs, params)
        a, b, c = (np.asarray(m, dtype=float) for m in (moments.mean, moments.mean_reciprocal, moments.mean_log))
        bad = ~(np.isfinite(a) & np.isfinite(b) & np.isfinite(c))
    except MatSkewTError as exc:
        # locate the offending observation for the message
        for i, x in enumerate(obs):
            try:
                latent_moments(x, params)
            except MatSkewTError as inner:
                raise NumericalError(f"E-step failed at observation {i}: {inner}") from inner
        raise NumericalError(f"E-step failed: {exc}") from exc
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NumericalError(f"E-step produced non-finite expectations at observation {i}")
    forms = quad_forms(obs, params)
    return EStepStats(
        a=a,
        b=b,
        c=c,
        bessel_arg=np.sqrt(forms.rho * (forms.delta + params.dof)),
        gig_index=-0.5 * (params.dof + n * p),
    )


def _mean(values):
    return _linalg.exact_sum(values) / len(values)


def cm_update_location_skewness(data, stats):
    """Closed-form ``M`` and ``A`` updates.

    ``M = sum_i X_i (abar b_i - 1) / D`` and ``A = sum_i X_i (bbar - b_i) / D``
    with ``D = sum_i abar b_i - N``.

    Raises
    ------
    DegenerateWeightsError
        If ``|D| < 1e-10`` (all ``b_i`` essentially equal to ``1/abar``).
    """
    obs = data.observations
    N = len(data)
    a_bar = _mean(stats.a)
    b_bar = _mean(stats.b)
    denom = _linalg.exact_sum(a_bar * stats.b) - N
    if not abs(denom) >= DENOMINATOR_MIN:
        raise DegenerateWeightsError(f"location/skewness denominator {denom!r} is degenerate")
    w_loc = a_bar * stats.b - 1.0
    w_skew = b_bar - stats.b
    M = _linalg.exact_sum(obs * w_loc[:, None, None]) / denom
    A = _linalg.exact_sum(obs * w_skew[:, None, None]) / denom
    return M, A


def nu_equation_lhs(nu):
    """``log(nu/2) + 1 - digamma(nu/2)``; strictly decreasing from +inf to 1."""
    half = 0.5 * nu
    return math.log(half) + 1.0 - digamma(half)


def solve_nu(mean_b_plus_c, bounds=(0.5, 200.0)):
    """Degrees of freedom solving ``nu_equation_lhs(nu) = mean_b_plus_c``.

    Brent's method on the bracket ``bounds``. Without a sign change the
    nearer bound is returned with ``clamped=True``.
    """
    target = float(mean_b_plus_c)
    if not math.isfinite(target):
        raise DomainError(f"mean(b + c) must be finite, got {mean_b_plus_c!r}")
    low, high = bounds

    def resid(nu):
        return nu_equation_lhs(nu) - target

    f_low, f_high = resid(low), resid(high)
    if f_low == 0.0:
        return NuSolution(low, False)
    if f_high == 0.0:
        return NuSolution(high, False)
    if f_high > 0.0:
        return NuSolution(high, True)
    if f_low < 0.0:
        return NuSolution(low, True)
    root = optimize.brentq(resid, low, high, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return NuSolution(float(root), False)


def _scatter(resid, skew, metric, weights_quad, weights_skew):
    """Per-observation ``b R G R' - A G R' - R G A' + a A G A'`` stacked on axis 0."""
    rg = resid @ metric
    quad = rg @ resid.transpose(0, 2, 1)
    cross = skew @ metric @ resid.transpose(0, 2, 1)
    skew_term = skew @ metric @ skew.T
    return (
        weights_quad[:, None, None] * quad
        - cross
        - cross.transpose(0, 2, 1)
        + weights_skew[:, None, None] * skew_term
    )


def cm_update_row_scale(data, stats, M, A, col_scale):
    """``Sigma`` update given new ``M``, ``A`` and the current ``Psi``."""
    N = len(data)
    n, p = data.dims
    psi_inv = _linalg.inv_from_chol(_linalg.cholesky(col_scale, "col_scale"))
    resid = data.observations - M
    terms = _scatter(resid, np.asarray(A, dtype=float), psi_inv, stats.b, stats.a)
    return _linalg.ensure_spd(_linalg.exact_sum(terms) / (N * p), "row_scale")


def cm_update_col_scale(data, stats, M, A, row_scale):
    """``Psi`` update given new ``M``, ``A`` and the just-updated ``Sigma``."""
    N = len(data)
    n, p = data.dims
    sigma_inv = _linalg.inv_from_chol(_linalg.cholesky(row_scale, "row_scale"))
    resid_t = (data.observations - M).transpose(0, 2, 1)
    terms = _scatter(resid_t, np.asarray(A, dtype=float).T, sigma_inv, stats.b, stats.a)
    return _linalg.ensure_spd(_linalg.exact_sum(terms) / (N * n), "col_scale")


def observed_loglik(data, params):
    """Sum of MVST log-densities over the dataset (exactly rounded)."""
    return _linalg.exact_sum(np.atleast_1d(mvst_log_density(data.observations, params)))


def aitken_check(l_prev2, l_prev, l_curr, epsilon):
    """Aitken-acceleration stopping rule on three consecutive log-likelihoods.

    ``a = (l_curr - l_prev) / (l_prev - l_prev2)`` and
    ``l_inf = l_prev + (l_curr - l_prev) / (1 - a)``; converged when
    ``0 <= l_inf - l_prev < epsilon``. A flat previous step
    (``l_prev == l_prev2``) counts as converged iff ``l_curr - l_prev < epsilon``.
    """
    step_prev = l_prev - l_prev2
    step_curr = l_curr - l_prev
    if step_prev == 0.0:
        return AitkenResult(bool(step_curr < epsilon), float("nan"), float(l_curr))
    a_t = step_curr / step_prev
    if a_t == 1.0:
        return AitkenResult(False, a_t, float("inf"))
    l_inf = l_prev + step_curr / (1.0 - a_t)
    gap = l_inf - l_prev
    return AitkenResult(bool(0.0 <= gap < epsilon), a_t, l_inf)


def init_params(data, config=None):
    """Starting values for ECM.

    ``moment`` strategy: ``M`` is the elementwise mean, ``A`` the gap between
    mean and elementwise median (nudged by 0.01 at its largest entry if
    ``rho`` would be negligible), ``Sigma`` isotropic at the average squared
    residual, ``Psi = I`` and ``nu = 10``. ``provided`` echoes ``config.initial_params``
    after a shape check.
    """
    config = config or FitConfig()
    N = len(data)
    n, p = data.dims
    if config.init_strategy == "provided":
        params = config.initial_params
        if params.shape != (n, p):
            raise ValidationError(f"initial params have shape {params.shape}, data has {(n, p)}")
        return params
    if N < 2:
        raise ValidationError("moment initialization needs at least 2 observations")
    obs = data.observations
    nu0 = 10.0
    mean = _linalg.exact_sum(obs) / N
    median = np.median(obs, axis=0)
    A = mean - median
    M = mean
    resid = obs - M
    var = _linalg.exact_sum((resid * resid).reshape(N, -1), axis=0)
    sigma = np.eye(n) * max(float(np.mean(var)) / N, 1e-8)
    psi = np.eye(p)
    params = MvstParams(M, A, sigma, psi, nu0)
    if params.rho < 10.0 * RHO_MIN:
        idx = np.unravel_index(np.argmax(np.abs(A)), A.shape)
        A = A.copy()
        A[idx] += 0.01
        params = params.with_updates(skewness=A)
    return params


def fit(data, config=None):
    """Fit MVST parameters to ``data`` by ECM.

    Returns
    -------
    FitResult
        Final parameters normalized to ``tr(Sigma) = n``.

    Raises
    ------
    FitError
        On any numerical failure, with the iteration index and the last
        valid parameters attached.
    """
    config = config or FitConfig()
    if not isinstance(data, Dataset):
        data = Dataset(data)
    params = init_params(data, config)
    initial_loglik = observed_loglik(data, params)
    trace = []
    aitken_history = []
    converged = False
    clamped = 0
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        try:
            stats = e_step(data, params)
            M, A = cm_update_location_skewness(data, stats)
            nu = solve_nu(_mean(stats.b + stats.c), config.nu_bounds)
            clamped += nu.clamped
            sigma = cm_update_row_scale(data, stats, M, A, params.col_scale)
            psi = cm_update_col_scale(data, stats, M, A, sigma)
            params_next = MvstParams(M, A, sigma, psi, nu.nu)
            loglik = observed_loglik(data, params_next)
        except MatSkewTError as exc:
            raise FitError(str(exc), iteration, params) from exc
        if not math.isfinite(loglik):
            raise FitError("non-finite log-likelihood", iteration, params)
        params = params_next
        trace.append(loglik)
        if len(trace) >= 3:
            check = aitken_check(trace[-3], trace[-2], trace[-1], config.epsilon)
            aitken_history.append(check.a_t)
            if check.converged:
                converged = True
                break
    logger.debug("ECM stopped after %d iterations (converged=%s)", iteration, converged)
    return FitResult(
        params=normalize_scale(params),
        loglik_trace=trace,
        iterations=iteration,
        converged=converged,
        aitken_history=aitken_history,
        initial_loglik=initial_loglik,
        nu_clamped=clamped,
    )
