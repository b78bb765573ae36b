"""Probability laws used by the inverse-probit race model.

The first passage time of a unit-variance Wiener process with drift ``mu``
across a boundary ``b`` is inverse Gaussian with mean ``b / mu`` and shape
``b**2``.  Densities are written in the drift/boundary parametrization so that
they match the race model directly.  The diffusion coefficient is fixed at 1
and the offset is always 0 when fitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import log_ndtr, ndtr

from .errors import DomainError, NumericalError

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class IGParams:
    """Drift, boundary and offset of one accumulator."""

    mu: float
    b: float = 2.0
    delta: float = 0.0

    def __post_init__(self):
        _check_params(self.mu, self.b, self.delta)

    def pdf(self, tau):
        return ig_pdf(tau, self.mu, self.b, self.delta)

    def cdf(self, tau):
        return ig_cdf(tau, self.mu, self.b, self.delta)

    def sample(self, rng, size=None):
        return ig_sample(rng, self.mu, self.b, size=size, delta=self.delta)

    @property
    def mean(self):
        return self.delta + self.b / self.mu

    @property
    def var(self):
        return self.b / self.mu**3


def _check_params(mu, b, delta=0.0):
    mu = np.asarray(mu, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(mu > 0)):
        raise DomainError(f"drift must be positive and finite, got {mu!r}")
    if not (np.all(np.isfinite(b)) and np.all(b > 0)):
        raise DomainError(f"boundary must be positive and finite, got {b!r}")
    if np.any(np.asarray(delta) < 0):
        raise DomainError(f"offset must be nonnegative, got {delta!r}")
    return mu, b


def _shifted(tau, delta):
    t = np.asarray(tau, dtype=float) - delta
    if np.any(~(t > 0)):
        raise DomainError("tau must exceed the offset")
    return t


def ig_logpdf(tau, mu, b=2.0, delta=0.0):
    """Log first-passage density, vectorized over ``tau`` and ``mu``."""
    mu, b = _check_params(mu, b, delta)
    t = _shifted(tau, delta)
    return np.log(b) - 0.5 * _LOG_2PI - 1.5 * np.log(t) - (b - mu * t) ** 2 / (2.0 * t)


def ig_pdf(tau, mu, b=2.0, delta=0.0):
    """First-passage density

    .. math::
        g(\\tau) = \\frac{b}{\\sqrt{2\\pi}} (\\tau-\\delta)^{-3/2}
                   \\exp\\left[-\\frac{\\{b - \\mu(\\tau-\\delta)\\}^2}{2(\\tau-\\delta)}\\right]
    """
    return np.exp(ig_logpdf(tau, mu, b, delta))


def _phi_args(t, mu, b):
    rt = np.sqrt(t)
    # shape b^2, mean b/mu:  sqrt(lam/t) (t/m -+ 1) = (mu t -+ b)/sqrt(t)
    return (mu * t - b) / rt, -(mu * t + b) / rt


def ig_cdf(tau, mu, b=2.0, delta=0.0):
    """Distribution function via the closed form in the standard normal CDF.

    The second term ``exp(2 b mu) Phi(-(mu t + b)/sqrt(t))`` is evaluated in
    log space so large ``b * mu`` does not overflow.
    """
    mu, b = _check_params(mu, b, delta)
    t = _shifted(tau, delta)
    a1, a2 = _phi_args(t, mu, b)
    second = np.exp(2.0 * b * mu + log_ndtr(a2))
    # past the mode of the first term, 1 - sf keeps rounding monotone
    lower = ndtr(a1) + second
    upper = 1.0 - (ndtr(-a1) - second)
    return np.clip(np.where(a1 > 0, upper, lower), 0.0, 1.0)


def ig_sf(tau, mu, b=2.0, delta=0.0):
    """Survival function ``1 - G``, computed without subtracting from one."""
    mu, b = _check_params(mu, b, delta)
    t = _shifted(tau, delta)
    a1, a2 = _phi_args(t, mu, b)
    return np.clip(ndtr(-a1) - np.exp(2.0 * b * mu + log_ndtr(a2)), 0.0, 1.0)


def ig_sample(rng, mu, b=2.0, size=None, delta=0.0):
    """Draw first-passage times by the chi-square transform with uniform selection.

    Parameters
    ----------
    rng : numpy.random.Generator
    mu, b : float or array_like
        Drift and boundary; broadcast against ``size``.
    size : int or tuple, optional
        Output shape.  Defaults to the broadcast shape of ``mu`` and ``b``.
    """
    mu, b = _check_params(mu, b, delta)
    if size is None:
        size = np.broadcast(mu, b).shape
    m = b / mu
    lam = b * b
    r = m * rng.standard_normal(size) ** 2
    s = np.sqrt(r * r + 4.0 * lam * r)
    # root of the quadratic written without cancellation
    x = m * 4.0 * lam * r / (r + s) ** 2
    x = np.where(x > 0, x, m)
    u = rng.random(size)
    out = np.where(u * (m + x) <= m, x, m * m / x)
    return out + delta


def mvn_sample(rng, mean, precision):
    """Gaussian draw parametrized by its precision matrix.

    The precision is Cholesky-factorized once; the draw solves against the
    upper factor instead of inverting.
    """
    mean = np.asarray(mean, dtype=float)
    chol = cholesky_precision(precision)
    z = rng.standard_normal(mean.shape[0])
    return mean + linalg.solve_triangular(chol, z, lower=True, trans="T")


def cholesky_precision(precision):
    precision = np.asarray(precision, dtype=float)
    if not np.allclose(precision, precision.T, rtol=1e-10, atol=1e-10):
        raise NumericalError("precision matrix is not symmetric")
    try:
        return linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(precision)
        raise NumericalError(
            f"precision matrix is not positive definite (min eigenvalue {w.min():.3e})"
        ) from exc


def mvn_sample_canonical(rng, linear, precision):
    """Draw from N(Q^{-1} h, Q^{-1}) given ``h = linear`` and ``Q = precision``.

    Returns the draw and the mean.
    """
    chol = cholesky_precision(precision)
    mean = linalg.cho_solve((chol, True), np.asarray(linear, dtype=float))
    z = rng.standard_normal(mean.shape[0])
    return mean + linalg.solve_triangular(chol, z, lower=True, trans="T"), mean


def dirichlet_sample(rng, alpha):
    """Dirichlet draw by normalized gammas.

    Tiny concentrations can underflow every gamma variate to zero; those draws
    are redone in log space.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size == 0 or np.any(~(alpha > 0)):
        raise DomainError("Dirichlet concentrations must be positive")
    g = rng.standard_gamma(alpha)
    total = g.sum()
    if total > 0 and np.isfinite(total):
        return g / total
    # log Gamma(a) = log Gamma(a+1) + log(U)/a
    logg = np.log(rng.standard_gamma(alpha + 1.0)) + np.log(rng.random(alpha.size)) / alpha
    logg -= logg.max()
    w = np.exp(logg)
    return w / w.sum()


def half_cauchy_logpdf(x, scale=1.0):
    """Log density of the half-Cauchy law on (0, inf)."""
    x = np.asarray(x, dtype=float)
    if scale <= 0:
        raise DomainError("scale must be positive")
    if np.any(~(x > 0)):
        raise DomainError("half-Cauchy support is x > 0")
    return np.log(2.0 / (np.pi * scale)) - np.log1p((x / scale) ** 2)
