"""Experiment data model, drift assembly and inverse-probit category probabilities.

Drift arrays are indexed ``[d, s, i, t]``: response category, stimulus,
subject, block (all 0-based internally; files and records are 1-based).
Input-response combinations are flattened as ``x = d * d0 + s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .dists import ig_logpdf, ig_sample, ig_sf
from .errors import ConfigError, DomainError, NumericalError
from .projection import SimplexSpec, project_batch


class TrialRecord(NamedTuple):
    subject: int
    block: int
    trial: int
    stimulus: int
    response: int


@dataclass(frozen=True)
class Dataset:
    """Categorical trials in columnar form (1-based indices).

    Construct with :meth:`from_arrays` or :meth:`from_records`; both validate.
    """

    n: int
    T: int
    L: int
    d0: int
    subject: np.ndarray = field(repr=False)
    block: np.ndarray = field(repr=False)
    trial: np.ndarray = field(repr=False)
    stimulus: np.ndarray = field(repr=False)
    response: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, subject, block, trial, stimulus, response, *, n=None, T=None, L=None, d0=None):
        cols = [np.asarray(c, dtype=np.int64).ravel() for c in (subject, block, trial, stimulus, response)]
        if len({c.size for c in cols}) != 1:
            raise DomainError("columns have different lengths")
        if cols[0].size == 0:
            raise DomainError("dataset has no trials")
        subject, block, trial, stimulus, response = cols
        n = int(subject.max()) if n is None else int(n)
        T = int(block.max()) if T is None else int(T)
        L = int(trial.max()) if L is None else int(L)
        # a single observed category still implies a choice between at least two
        d0 = max(2, int(max(stimulus.max(), response.max()))) if d0 is None else int(d0)
        ds = cls(n, T, L, d0, subject, block, trial, stimulus, response)
        ds.validate()
        return ds

    @classmethod
    def from_records(cls, records, **dims):
        arr = np.array([tuple(r) for r in records], dtype=np.int64).reshape(-1, 5)
        return cls.from_arrays(*arr.T, **dims)

    def validate(self):
        if self.d0 < 2:
            raise DomainError(f"need at least two categories, got d0={self.d0}")
        bounds = {
            "subject": self.n,
            "block": self.T,
            "trial": self.L,
            "stimulus": self.d0,
            "response": self.d0,
        }
        for name, hi in bounds.items():
            col = getattr(self, name)
            bad = np.flatnonzero((col < 1) | (col > hi))
            if bad.size:
                r = bad[0]
                raise DomainError(f"row {r + 1}: {name}={col[r]} outside 1..{hi}")
        key = (self.subject * (self.T + 1) + self.block) * (self.L + 1) + self.trial
        order = np.argsort(key, kind="stable")
        dup = order[1:][key[order][1:] == key[order][:-1]]
        if dup.size:
            r = int(dup.min())
            raise DomainError(
                f"row {r + 1}: duplicate (subject, block, trial) = "
                f"({self.subject[r]}, {self.block[r]}, {self.trial[r]})"
            )

    def __len__(self):
        return self.subject.size

    @property
    def records(self):
        return [TrialRecord(*map(int, row)) for row in self.as_matrix()]

    def as_matrix(self):
        return np.column_stack([self.subject, self.block, self.trial, self.stimulus, self.response])

    def subset(self, mask):
        return Dataset.from_arrays(
            *(c[mask] for c in self.as_matrix().T), n=self.n, T=self.T, L=self.L, d0=self.d0
        )

    def response_frequencies(self):
        """Empirical ``P(d | s, i, t)`` as a ``[d, s, i, t]`` array (NaN where no trials)."""
        counts = np.zeros((self.d0, self.d0, self.n, self.T))
        np.add.at(counts, (self.response - 1, self.stimulus - 1, self.subject - 1, self.block - 1), 1)
        tot = counts.sum(axis=0, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return counts / tot


@dataclass
class FixedEffects:
    """Clustered spline coefficients of the population drift curves.

    ``atoms[z]`` is the coefficient vector shared by every combination with
    ``labels[x] == z`` (0-based labels).
    """

    atoms: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    alpha: float = 1.0
    mu_beta0: np.ndarray | None = None
    sigma_a2: float = 0.1
    sigma_s2: float = 0.1

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=float)
        z_max, K = self.atoms.shape
        if self.mu_beta0 is None:
            self.mu_beta0 = np.ones(K)
        if self.labels.min() < 0 or self.labels.max() >= z_max:
            raise ConfigError("cluster labels out of range")
        if self.weights.shape != (z_max,) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ConfigError("cluster weights must be a probability vector over z_max")

    @property
    def coefficients(self):
        """Per-combination coefficients, shape ``(x_max, K)``."""
        return self.atoms[self.labels]


@dataclass
class RandomEffects:
    """Subject spline coefficients for correct (``betaC``) and incorrect (``betaI``) responses."""

    betaC: np.ndarray
    betaI: np.ndarray
    sigmaC_a2: float = 0.1
    sigmaC_s2: float = 0.1
    sigmaI_a2: float = 0.1
    sigmaI_s2: float = 0.1

    @classmethod
    def zeros(cls, n, K):
        return cls(np.zeros((n, K)), np.zeros((n, K)))


@dataclass
class DriftField:
    unconstrained: np.ndarray
    projected: np.ndarray

    @property
    def d0(self):
        return self.projected.shape[0]


def project_field(mu, spec):
    """Project every ``[:, s, i, t]`` fiber of a drift array."""
    d0 = mu.shape[0]
    fibers = np.moveaxis(mu, 0, -1).reshape(-1, d0)
    out = project_batch(fibers, spec).reshape(mu.shape[1:] + (d0,))
    return np.moveaxis(out, -1, 0)


def fixed_curves(fe, B, d0):
    """``f[d, s, t]`` from clustered atoms and block design matrix ``B``."""
    f = fe.coefficients @ B.T
    return f.reshape(d0, d0, B.shape[0])


def random_curves(re, B, d0):
    """``u[d, s, i, t]``: the correct curve on the diagonal, the incorrect one elsewhere."""
    uC = re.betaC @ B.T
    uI = re.betaI @ B.T
    eye = np.eye(d0, dtype=bool)[:, :, None, None]
    return np.where(eye, uC[None, None], uI[None, None])


def assemble_drifts(fe, re, basis, spec):
    """Unconstrained drifts ``B(t) beta*_{z_x} + B(t) beta_U^(i)`` and their projection."""
    d0 = spec.d0
    z_max, K = fe.atoms.shape
    if fe.labels.shape != (d0 * d0,):
        raise ConfigError(f"expected {d0 * d0} labels, got {fe.labels.shape}")
    if K != basis.K or re.betaC.shape[1] != K or re.betaI.shape != re.betaC.shape:
        raise ConfigError("coefficient dimensions do not match the basis")
    B = basis.design_matrix()
    mu = fixed_curves(fe, B, d0)[:, :, None, :] + random_curves(re, B, d0)
    return DriftField(unconstrained=mu, projected=project_field(mu, spec))


def category_prob_mc_batch(mus, b, M, rng):
    """Race-simulation probabilities for each row of ``mus`` (shape ``(m, d0)``)."""
    mus = np.asarray(mus, dtype=float)
    if M <= 0:
        raise ConfigError("number of race simulations must be positive")
    m, d0 = mus.shape
    tau = ig_sample(rng, mus[:, None, :], b, size=(m, M, d0))
    win = tau.argmin(axis=2)
    counts = np.zeros((m, d0))
    np.add.at(counts, (np.repeat(np.arange(m), M), win.ravel()), 1)
    return counts / M


def category_prob_mc(mu_fiber, b, M, rng):
    """Fraction of ``M`` simulated races won by each accumulator."""
    return category_prob_mc_batch(np.asarray(mu_fiber, dtype=float)[None, :], b, M, rng)[0]


def _quad_limits(mu, b):
    mu_max, mu_min = mu.max(), mu.min()
    lo = b * b / (2.0 * (b * mu_max + 80.0))
    hi = 2.0 * (80.0 + b * mu_min) / mu_min**2 + 10.0 * b / mu_min
    return lo, hi


def category_prob_quad(mu_fiber, b=2.0, *, epsabs=1e-12, epsrel=1e-10):
    """Probability that each accumulator finishes first, by 1-D adaptive quadrature.

    Integrates ``g(tau | mu_d) * prod_{d' != d} {1 - G(tau | mu_d')}`` in
    log-time, which keeps the integrand well scaled for small drifts.
    """
    mu = np.asarray(mu_fiber, dtype=float)
    if np.any(~(mu > 0)):
        raise DomainError("drifts must be positive")
    lo, hi = _quad_limits(mu, b)
    means = np.sort(np.log(np.clip(b / mu, lo * 1.01, hi / 1.01)))
    # near-duplicate breakpoints leave slivers that quad cannot resolve
    means = means[np.concatenate([[True], np.diff(means) > 1e-6])]
    out = np.empty(mu.size)
    for d in range(mu.size):
        others = np.delete(mu, d)

        def integrand(u, d=d, others=others):
            t = np.exp(u)
            return np.exp(ig_logpdf(t, mu[d], b) + u) * np.prod(ig_sf(t, others, b))

        val, err, *rest = integrate.quad(
            integrand,
            np.log(lo),
            np.log(hi),
            points=means,
            limit=400,
            epsabs=epsabs,
            epsrel=epsrel,
            full_output=1,
        )
        if rest and len(rest) > 1 and err > 1e-7:
            raise NumericalError(f"quadrature did not converge for drifts {mu} (err {err:.2e})")
        out[d] = val
    return out


def loglik(ds, field, b, M, rng):
    """Monte Carlo log-likelihood of the observed responses under the projected field."""
    if len(ds) == 0:
        raise DomainError("empty dataset")
    d0 = ds.d0
    proj = field.projected
    if proj.shape != (d0, d0, ds.n, ds.T):
        raise ConfigError("drift field does not cover the dataset")
    fibers = np.moveaxis(proj, 0, -1)  # [s, i, t, d]
    s, i, t = ds.stimulus - 1, ds.subject - 1, ds.block - 1
    keys, inv = np.unique(np.ravel_multi_index((s, i, t), fibers.shape[:3]), return_inverse=True)
    probs = category_prob_mc_batch(fibers.reshape(-1, d0)[keys], b, M, rng)
    p = probs[inv, ds.response - 1]
    return float(np.sum(np.log(np.maximum(p, 1.0 / (M + 1)))))
