"""Independent reference computations for the test-suite.

Nothing here calls into the package's numerical paths: Bessel values come
from quadrature of the integral definition, densities are written out with
explicit inverses and determinants, GIG moments are ratios of quadratures of
the unnormalized density.
"""

import math

import numpy as np
from scipy import integrate, optimize, special, stats


def _peak_window(log_f, center, scale):
    """Mode, log-height and an interval outside which exp(log_f) is below e^-60 of its peak.

    ``log_f`` must be unimodal (all integrands here are log-concave in t).
    """
    peak = optimize.minimize_scalar(lambda t: -log_f(t), bracket=(center - scale, center + scale))
    t_star = float(peak.x)
    top = log_f(t_star)

    def edge(direction):
        step = scale
        while log_f(t_star + direction * step) - top > -60.0:
            step *= 2.0
        return t_star + direction * step

    return t_star, top, edge(-1.0), edge(1.0)


def _quad(g, breaks):
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        val, _ = integrate.quad(g, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500)
        total += val
    return total


def _peak_quad(log_f, center, scale):
    """log of the integral over the real line of exp(log_f), peaked near ``center``."""
    t_star, top, lo, hi = _peak_window(log_f, center, scale)
    return top + math.log(_quad(lambda t: math.exp(log_f(t) - top), [lo, t_star, hi]))


def log_bessel_k_quad(order, x):
    """log K_order(x) from 1/2 * int_0^inf y^(order-1) exp(-x/2 (y + 1/y)) dy, with y = e^t."""
    order = float(order)

    def log_f(t):
        return order * t - x * math.cosh(t)

    center = math.asinh(order / x)
    return math.log(0.5) + _peak_quad(log_f, center, 1.0)


def gig_unnormalized_log(y, a, b, lam):
    return (lam - 1.0) * math.log(y) - 0.5 * (a * y + b / y)


def gig_moments_quad(a, b, lam):
    """(E[Y], E[1/Y], E[log Y]) by quadrature in log y of the unnormalized GIG density."""
    mode_guess = math.log(math.sqrt(b / a))

    def log_f(t, power=0.0):
        return gig_unnormalized_log(math.exp(t), a, b, lam) + t + power * t

    log_z = _peak_quad(log_f, mode_guess, 1.0)
    mean = math.exp(_peak_quad(lambda t: log_f(t, 1.0), mode_guess, 1.0) - log_z)
    mean_rec = math.exp(_peak_quad(lambda t: log_f(t, -1.0), mode_guess, 1.0) - log_z)
    # E[log Y] = int t f(t) dt; the weight changes sign at t = 0
    t_star, top, lo, hi = _peak_window(log_f, mode_guess, 1.0)
    breaks = sorted({lo, t_star, hi} | ({0.0} if lo < 0.0 < hi else set()))
    total = _quad(lambda t: t * math.exp(log_f(t) - top), breaks)
    mean_log = total * math.exp(top - log_z)
    return mean, mean_rec, mean_log


def gig_normalizer_quad(a, b, lam):
    """Integral of the normalized GIG density (written out from its closed form) over (0, inf)."""
    log_norm = 0.5 * lam * math.log(a / b) - math.log(2.0) - log_bessel_k_quad(lam, math.sqrt(a * b))

    def log_f(t):
        return log_norm + gig_unnormalized_log(math.exp(t), a, b, lam) + t

    return math.exp(_peak_quad(log_f, math.log(math.sqrt(b / a)), 1.0))


def mvn_logpdf(x, mean, cov):
    return float(stats.multivariate_normal(mean=mean, cov=cov).logpdf(x))


def matnorm_logpdf_explicit(X, M, sigma, psi):
    """Matrix normal log density with explicit inverses and determinants."""
    n, p = M.shape
    R = X - M
    quad = np.trace(np.linalg.inv(sigma) @ R @ np.linalg.inv(psi) @ R.T)
    return (
        -0.5 * n * p * math.log(2 * math.pi)
        - 0.5 * p * math.log(np.linalg.det(sigma))
        - 0.5 * n * math.log(np.linalg.det(psi))
        - 0.5 * quad
    )


def joint_logpdf_explicit(X, w, M, A, sigma, psi, nu):
    """log f(X, w) = log N(X; M + wA, w Sigma, Psi) + log IG(w; nu/2, nu/2)."""
    log_x_given_w = matnorm_logpdf_explicit(X, M + w * A, w * sigma, psi)
    log_w = float(stats.invgamma(a=nu / 2.0, scale=nu / 2.0).logpdf(w))
    return log_x_given_w + log_w


def mvst_logpdf_quad(X, M, A, sigma, psi, nu):
    """log of the integral over w of the joint density, by adaptive quadrature in log w."""
    return _peak_quad(lambda t: joint_logpdf_explicit(X, math.exp(t), M, A, sigma, psi, nu) + t, 0.0, 1.0)


def vec_quadratic(R, sigma, psi):
    """vec(R)' (Psi kron Sigma)^{-1} vec(R) with an explicit Kronecker inverse."""
    v = R.ravel(order="F")
    return float(v @ np.linalg.inv(np.kron(psi, sigma)) @ v)


def student_t_logpdf(x, nu):
    return float(stats.t(df=nu).logpdf(x))


def bisect(f, lo, hi, width=1e-12):
    """Plain bisection for a decreasing-or-increasing f with a sign change on [lo, hi]."""
    f_lo = f(lo)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def digamma_series(x):
    """Digamma by upward recurrence plus the asymptotic series."""
    acc = 0.0
    while x < 20.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = inv2 * (1 / 12 - inv2 * (1 / 120 - inv2 * (1 / 252 - inv2 * (1 / 240 - inv2 / 132))))
    return acc + math.log(x) - 0.5 / x - tail


def random_spd(rng, dim, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = np.exp(rng.uniform(0.0, math.log(cond), size=dim))
    mat = (q * eig) @ q.T
    return 0.5 * (mat + mat.T)


def invgamma_expectations_closed(alpha, beta):
    return beta / (alpha - 1.0), alpha / beta, math.log(beta) - special.digamma(alpha)
