"""Euclidean projection onto the floored constant-sum simplex.

The target set is ``{w : sum(w) == k, w_i >= eps}``.  Drift vectors are mapped
onto it after every unconstrained update so that drifts of different stimuli
live on a common scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class SimplexSpec:
    """Target sum ``k``, componentwise floor ``eps`` and dimension ``d0``."""

    d0: int
    k: float | None = None
    eps: float = 0.01

    def __post_init__(self):
        if self.k is None:
            object.__setattr__(self, "k", float(self.d0))
        if int(self.d0) != self.d0 or self.d0 < 2:
            raise ConfigError(f"simplex dimension must be an integer >= 2, got {self.d0}")
        if self.eps < 0:
            raise ConfigError("eps must be nonnegative")
        if not self.k > self.d0 * self.eps:
            raise ConfigError(
                f"infeasible simplex: k={self.k} must exceed d0*eps={self.d0 * self.eps}"
            )


def project_batch(mus, spec):
    """Project every row of ``mus`` onto the simplex described by ``spec``.

    Sort each row in decreasing order, find the largest ``rho`` with
    ``mu*_rho - (cumsum_rho - k + (d0 - rho) * eps) / rho > eps`` and shift by

        theta = (cumsum_rho - k + (d0 - rho) * eps) / rho

    before flooring at ``eps``.

    Parameters
    ----------
    mus : array_like, shape (m, d0)
    spec : SimplexSpec

    Returns
    -------
    numpy.ndarray, shape (m, d0)
    """
    x = np.asarray(mus, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.d0:
        raise ConfigError(f"expected shape (m, {spec.d0}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("cannot project non-finite drifts")
    d0, k, eps = spec.d0, float(spec.k), float(spec.eps)
    # stable sort keeps ties in index order
    srt = -np.sort(-x, axis=1, kind="stable")
    csum = np.cumsum(srt, axis=1)
    j = np.arange(1, d0 + 1)
    cond = srt - (csum - k + (d0 - j) * eps) / j > eps
    # j=1 always qualifies because k > d0 * eps
    rho = d0 - np.argmax(cond[:, ::-1], axis=1)
    crho = csum[np.arange(x.shape[0]), rho - 1]
    theta = (crho - k + (d0 - rho) * eps) / rho
    return np.maximum(x - theta[:, None], eps)


def project(mu, spec):
    """Project a single drift vector; see :func:`project_batch`."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1:
        raise ConfigError("project expects a vector")
    return project_batch(mu[None, :], spec)[0]
