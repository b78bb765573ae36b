"""Convergence diagnostics and partition-agreement indices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.linalg import solve_toeplitz

from .errors import DomainError


class UndefinedStatistic(DomainError):
    """Raised when a statistic has a zero denominator (e.g. a constant chain)."""


@dataclass(frozen=True)
class Partition:
    """Cluster id per object; ids need not be contiguous."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels).ravel()
        if lab.size == 0:
            raise DomainError("empty partition")
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.labels.size

    def blocks(self):
        return [set(np.flatnonzero(self.labels == c).tolist()) for c in np.unique(self.labels)]


def _labels(p):
    return p.labels if isinstance(p, Partition) else Partition(p).labels


# ---------------------------------------------------------------------------
# MCMC diagnostics


def autocorrelation(chain, max_lag):
    """Sample autocorrelation at lags ``0..max_lag`` (biased estimator)."""
    x = np.asarray(chain, dtype=float)
    n = x.size
    if not 0 <= max_lag < n:
        raise DomainError("max_lag must be smaller than the chain length")
    x = x - x.mean()
    c0 = np.dot(x, x) / n
    if c0 <= 0:
        raise UndefinedStatistic("autocorrelation of a constant chain is undefined")
    # FFT with zero padding
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[: max_lag + 1] / n
    return acov / c0


def spectrum0_ar(x, max_order=None):
    """Spectral density at frequency zero from an AR fit chosen by AIC.

    Returns ``sigma2 / (1 - sum(phi))**2``, the asymptotic variance of the
    chain mean times ``n``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_order is None:
        max_order = min(n - 1, int(10 * np.log10(n)))
    acov = autocorrelation(x, max_order) * np.var(x)
    best = (n * np.log(acov[0]), 0, np.array([]), acov[0])
    for p in range(1, max_order + 1):
        phi = solve_toeplitz(acov[:p], acov[1 : p + 1])
        s2 = acov[0] - np.dot(phi, acov[1 : p + 1])
        if s2 <= 0:
            break
        aic = n * np.log(s2) + 2 * p
        if aic < best[0]:
            best = (aic, p, phi, s2)
    _, p, phi, s2 = best
    denom = (1.0 - phi.sum()) ** 2 if p else 1.0
    return s2 / max(denom, 1e-12)


def _batch_means_var(x):
    n = x.size
    nb = max(2, int(np.sqrt(n)))
    size = n // nb
    means = x[: nb * size].reshape(nb, size).mean(axis=1)
    return size * means.var(ddof=1)


def geweke(chain, frac_a=0.1, frac_b=0.5):
    """Geweke z-score comparing the means of the first and last windows.

    Window variances use the AR spectral density at zero; windows shorter
    than 50 draws fall back to batch means.

    Returns
    -------
    z : float
    p : float
        Two-sided normal p-value.
    """
    x = np.asarray(chain, dtype=float)
    n = x.size
    if n < 20:
        raise DomainError("Geweke needs at least 20 draws")
    if not (0 < frac_a and 0 < frac_b and frac_a + frac_b <= 1):
        raise DomainError("window fractions must be positive and sum to at most 1")
    a = x[: int(math.floor(frac_a * n))]
    b = x[n - int(math.floor(frac_b * n)) :]
    if a.size < 2 or b.size < 2:
        raise DomainError("windows too short")
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        raise UndefinedStatistic("Geweke statistic undefined for a constant chain")

    def var0(w):
        if np.ptp(w) == 0:
            return 0.0
        return spectrum0_ar(w) if w.size >= 50 else _batch_means_var(w)

    se2 = var0(a) / a.size + var0(b) / b.size
    diff = a.mean() - b.mean()
    if se2 <= 0:
        raise UndefinedStatistic("zero variance in both windows")
    z = diff / math.sqrt(se2)
    return float(z), float(2.0 * stats.norm.sf(abs(z)))


def effective_sample_size(chain):
    """``n * var / spectrum0``, a cheap mixing summary for tables."""
    x = np.asarray(chain, dtype=float)
    if np.ptp(x) == 0:
        return float(x.size)
    return float(x.size * np.var(x) / spectrum0_ar(x))


# ---------------------------------------------------------------------------
# partition agreement


def _comb2(v):
    v = np.asarray(v, dtype=np.int64)
    return v * (v - 1) // 2


def contingency(u, v):
    u, v = _labels(u), _labels(v)
    if u.size != v.size:
        raise DomainError("partitions cover different numbers of objects")
    _, ui = np.unique(u, return_inverse=True)
    _, vi = np.unique(v, return_inverse=True)
    table = np.zeros((ui.max() + 1, vi.max() + 1), dtype=np.int64)
    np.add.at(table, (ui, vi), 1)
    return table


def rand_index(u, v):
    """Fraction of object pairs on which two partitions agree."""
    table = contingency(u, v)
    n = table.sum()
    if n < 2:
        return 1.0
    total = n * (n - 1) // 2
    same_both = _comb2(table).sum()
    same_u = _comb2(table.sum(axis=1)).sum()
    same_v = _comb2(table.sum(axis=0)).sum()
    diff_both = total - same_u - same_v + same_both
    return float((same_both + diff_both) / total)


def adjusted_rand_index(u, v):
    """Chance-corrected Rand index under the hypergeometric null.

    When the denominator vanishes (both partitions all singletons or both a
    single cluster) the index is defined as 1 for equal partitions and 0
    otherwise.
    """
    table = contingency(u, v)
    n = table.sum()
    sum_ij = _comb2(table).sum()
    a = _comb2(table.sum(axis=1)).sum()
    b = _comb2(table.sum(axis=0)).sum()
    total = n * (n - 1) // 2
    expected = a * b / total if total else 0.0
    denom = 0.5 * (a + b) - expected
    if denom == 0:
        return 1.0 if rand_index(u, v) == 1.0 else 0.0
    return float((sum_ij - expected) / denom)


def coclustering_matrix(samples_or_labels):
    """Posterior probability that two combinations share a cluster label."""
    lab = getattr(samples_or_labels, "labels", samples_or_labels)
    lab = np.asarray(lab)
    if lab.ndim != 2 or lab.shape[0] == 0:
        raise DomainError("need a nonempty (draws, objects) label history")
    return (lab[:, :, None] == lab[:, None, :]).mean(axis=0)


def point_partition(samples_or_labels):
    """Stored draw whose co-clustering indicator is closest to the posterior average."""
    lab = np.asarray(getattr(samples_or_labels, "labels", samples_or_labels))
    avg = coclustering_matrix(lab)
    loss = [np.sum(((row[:, None] == row[None, :]) - avg) ** 2) for row in lab]
    return Partition(lab[int(np.argmin(loss))].copy())


# ---------------------------------------------------------------------------
# tables over fitted chains


def tracked_parameters(samples, which="correct"):
    """Named scalar chains from posterior samples.

    ``which`` selects subject-level correct-response drifts
    ``mu_{d,d}^(i)(t)`` (``"correct"``), all subject drifts (``"drifts"``) or
    the six variance components (``"variances"``).  Cluster-label-dependent
    quantities such as atoms are excluded because labels switch.
    """
    from .sampler import VARIANCE_NAMES

    out = {}
    if which == "variances":
        for j, name in enumerate(VARIANCE_NAMES):
            out[name] = samples.variances[:, j]
        return out
    if which not in ("correct", "drifts"):
        raise DomainError(f"unknown parameter set {which!r}")
    dr = samples.drifts
    _, d0, _, n, T = dr.shape
    for d in range(d0):
        for s in range(d0):
            if which == "correct" and d != s:
                continue
            for i in range(n):
                for t in range(T):
                    out[f"mu[{d + 1},{s + 1}][{i + 1}]({t + 1})"] = dr[:, d, s, i, t]
    return out


def geweke_table(chains, frac_a=0.1, frac_b=0.5):
    """Geweke z, p and effective sample size per named chain.

    Constant chains get ``nan`` statistics rather than an error.
    """
    rows = {"parameter": [], "z": [], "p": [], "ess": []}
    for name, x in chains.items():
        try:
            z, p = geweke(x, frac_a, frac_b)
        except UndefinedStatistic:
            z, p = float("nan"), float("nan")
        rows["parameter"].append(name)
        rows["z"].append(z)
        rows["p"].append(p)
        rows["ess"].append(effective_sample_size(x))
    return rows


def acf_table(chains, max_lag=20):
    rows = {"parameter": [], "lag": [], "acf": []}
    for name, x in chains.items():
        lag = min(max_lag, len(x) - 1)
        try:
            r = autocorrelation(x, lag)
        except UndefinedStatistic:
            r = np.full(lag + 1, np.nan)
        rows["parameter"].extend([name] * (lag + 1))
        rows["lag"].extend(range(lag + 1))
        rows["acf"].extend(r.tolist())
    return rows
