"""Clamped B-spline bases over the block axis and first-difference penalties."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class SplineBasis:
    """B-spline basis with a clamped knot vector on ``[1, T]``.

    Attributes
    ----------
    T : int
        Number of blocks; the domain is ``[1, T]``.
    K : int
        Number of basis functions.
    degree : int
    knots : numpy.ndarray
        Full knot vector, ``K + degree + 1`` entries.
    """

    T: int
    K: int
    degree: int
    knots: np.ndarray = field(repr=False)

    @property
    def domain(self):
        return (1.0, float(self.T))

    def __call__(self, t):
        return eval_basis(self, t)

    def design_matrix(self, times=None):
        """Rows ``B(t)`` for each ``t``; defaults to the integer blocks ``1..T``."""
        if times is None:
            times = np.arange(1, self.T + 1, dtype=float)
        return np.vstack([eval_basis(self, t) for t in np.atleast_1d(times)])


def build_basis(T, K=None, degree=3):
    """Clamped basis with equally spaced interior knots on ``[1, T]``.

    ``K`` defaults to ``min(T, 6)`` and the degree is lowered if ``K`` is too
    small to carry it only when ``K`` was defaulted.
    """
    if T < 2:
        raise ConfigError("need at least two blocks")
    if K is None:
        K = min(T, 6)
        degree = min(degree, K - 1)
    if degree < 0 or K < degree + 1:
        raise ConfigError(f"K={K} basis functions cannot carry degree {degree}")
    n_inner = K - degree - 1
    inner = np.linspace(1.0, float(T), n_inner + 2)[1:-1]
    knots = np.concatenate([np.full(degree + 1, 1.0), inner, np.full(degree + 1, float(T))])
    return SplineBasis(T=int(T), K=int(K), degree=int(degree), knots=knots)


def _span(knots, degree, K, t):
    # last nonempty interval at the right endpoint
    if t >= knots[K]:
        return K - 1
    return int(np.searchsorted(knots, t, side="right") - 1)


def eval_basis(basis, t):
    """Evaluate all ``K`` basis functions at ``t`` (Cox-de Boor, triangular form)."""
    t = float(t)
    lo, hi = basis.domain
    if not (lo <= t <= hi):
        raise DomainError(f"t={t} outside [{lo}, {hi}]")
    p, K, kn = basis.degree, basis.K, basis.knots
    span = _span(kn, p, K, t)
    N = np.zeros(p + 1)
    N[0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = t - kn[span + 1 - j]
        right[j] = kn[span + j] - t
        saved = 0.0
        for r in range(j):
            tmp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        N[j] = saved
    out = np.zeros(K)
    out[span - p : span + 1] = N
    return out


def difference_matrix(K):
    """The ``(K-1) x K`` first-difference operator."""
    if K < 2:
        raise ConfigError("penalty needs K >= 2")
    return np.diff(np.eye(K), axis=0)


def penalty_matrix(K):
    """``D^T D`` for the first-difference operator ``D``."""
    D = difference_matrix(K)
    return D.T @ D


def check_full_rank(basis):
    """Raise if the block design matrix is column-rank deficient."""
    B = basis.design_matrix()
    if np.linalg.matrix_rank(B) < basis.K:
        raise ConfigError(
            f"basis with K={basis.K} is not identifiable from {basis.T} blocks"
        )
    return B
