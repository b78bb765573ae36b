"""Synthetic category-learning experiments with known drift trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dists import ig_sample
from .errors import ConfigError
from .model import Dataset, category_prob_quad
from .splines import build_basis


@dataclass(frozen=True)
class Trajectory:
    """Smooth saturating curve from ``start`` (block 1) to ``end`` (block T).

    ``rate`` controls curvature; ``rate == 0`` gives a straight line.
    """

    start: float
    end: float
    rate: float = 3.0

    def __call__(self, t, T):
        x = (np.asarray(t, dtype=float) - 1.0) / max(T - 1, 1)
        if self.rate == 0:
            g = x
        else:
            g = -np.expm1(-self.rate * x) / -np.expm1(-self.rate)
        return self.start + (self.end - self.start) * g


@dataclass(frozen=True)
class SimDesign:
    """Experiment dimensions, true clusters and their drift curves.

    ``clusters`` maps a cluster name to its ``(d, s)`` combinations (1-based)
    and ``curves`` maps the same names to a :class:`Trajectory`.  ``L`` is the
    number of trials per stimulus per block.
    """

    n: int
    T: int
    L: int
    d0: int
    clusters: dict
    curves: dict
    b: float = 2.0
    subject_effect_sd: float = 0.1
    floor: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.T, self.L) < 1 or self.d0 < 2:
            raise ConfigError("invalid design dimensions")
        seen = [x for members in self.clusters.values() for x in members]
        full = {(d, s) for d in range(1, self.d0 + 1) for s in range(1, self.d0 + 1)}
        if sorted(seen) != sorted(full) or len(seen) != len(full):
            raise ConfigError("clusters must partition all (d, s) combinations")
        if set(self.curves) != set(self.clusters):
            raise ConfigError("every cluster needs exactly one curve")
        grid = np.arange(1, self.T + 1)
        for name, c in self.curves.items():
            if np.any(c(grid, self.T) <= 0):
                raise ConfigError(f"trajectory of cluster {name} is not positive")

    def cluster_labels(self):
        """0-based true cluster id of each combination ``x = d * d0 + s``."""
        names = list(self.clusters)
        lab = np.empty(self.d0 * self.d0, dtype=np.int64)
        for z, name in enumerate(names):
            for d, s in self.clusters[name]:
                lab[(d - 1) * self.d0 + (s - 1)] = z
        return lab

    def population_drifts(self):
        """True curves ``[d, s, t]`` before subject perturbation."""
        names = list(self.clusters)
        grid = np.arange(1, self.T + 1)
        lab = self.cluster_labels()
        curves = np.stack([self.curves[nm](grid, self.T) for nm in names])
        return curves[lab].reshape(self.d0, self.d0, self.T)


def default_design(seed=0, **overrides):
    """Four-cluster, four-category design with 20 subjects over 10 blocks.

    Two clusters of correct responses (an easier and a harder pair of
    categories) and two of confusions.  Per-stimulus drift sums stay at
    least 0.5 above ``d0``, so the truth is off the constraint set.
    """
    clusters = {
        "S1": [(1, 1), (2, 2)],
        "S2": [(3, 3), (4, 4)],
        "M1": [(1, 2), (1, 3), (2, 1), (2, 3), (3, 4), (4, 3)],
        "M2": [(1, 4), (2, 4), (3, 1), (3, 2), (4, 1), (4, 2)],
    }
    curves = {
        "S1": Trajectory(2.0, 3.6, 2.5),
        "S2": Trajectory(1.9, 3.2, 1.5),
        "M1": Trajectory(1.3, 1.0, 2.0),
        "M2": Trajectory(0.7, 0.45, 2.0),
    }
    kw = dict(n=20, T=10, L=40, d0=4, clusters=clusters, curves=curves, b=2.0, seed=seed)
    kw.update(overrides)
    return SimDesign(**kw)


@dataclass
class GroundTruth:
    """True subject-level drifts and probabilities, ``[d, s, i, t]``, plus true labels."""

    drifts: np.ndarray
    probs: np.ndarray
    labels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


def subject_drifts(design, rng):
    """True drifts ``[d, s, i, t]`` with smooth subject deviations.

    Deviations are spline curves with iid normal coefficients, one curve for
    correct and one for incorrect responses per subject, floored at
    ``design.floor``.
    """
    d0, n, T = design.d0, design.n, design.T
    pop = design.population_drifts()
    if design.subject_effect_sd > 0:
        basis = build_basis(T)
        B = basis.design_matrix()
        coefC = rng.normal(0.0, design.subject_effect_sd, (n, basis.K))
        coefI = rng.normal(0.0, design.subject_effect_sd, (n, basis.K))
        uC, uI = coefC @ B.T, coefI @ B.T
    else:
        uC = uI = np.zeros((n, T))
    eye = np.eye(d0, dtype=bool)[:, :, None, None]
    u = np.where(eye, uC[None, None], uI[None, None])
    return np.maximum(pop[:, :, None, :] + u, design.floor)


def true_probabilities(drifts, b):
    """Quadrature probabilities for every fiber of a ``[d, s, i, t]`` drift array."""
    d0 = drifts.shape[0]
    fibers = np.moveaxis(drifts, 0, -1).reshape(-1, d0)
    uniq, inv = np.unique(fibers, axis=0, return_inverse=True)
    p = np.array([category_prob_quad(f, b) for f in uniq])[inv.ravel()]
    return np.moveaxis(p.reshape(drifts.shape[1:] + (d0,)), -1, 0)


def generate(design, rng=None):
    """Simulate a dataset by racing inverse-Gaussian accumulators.

    Every subject sees each stimulus ``L`` times per block in shuffled order;
    trials are numbered ``1 .. d0 * L`` within a block.

    Returns
    -------
    Dataset, GroundTruth
    """
    if rng is None:
        rng = np.random.default_rng(design.seed)
    d0, n, T, L = design.d0, design.n, design.T, design.L
    drifts = subject_drifts(design, rng)
    per_block = d0 * L
    rows = []
    for i in range(n):
        for t in range(T):
            stim = rng.permutation(np.repeat(np.arange(d0), L))
            mus = drifts[:, stim, i, t].T  # (per_block, d0)
            tau = ig_sample(rng, mus, design.b)
            resp = tau.argmin(axis=1)
            rows.append(
                np.column_stack(
                    [
                        np.full(per_block, i + 1),
                        np.full(per_block, t + 1),
                        np.arange(1, per_block + 1),
                        stim + 1,
                        resp + 1,
                    ]
                )
            )
    data = np.vstack(rows)
    ds = Dataset.from_arrays(*data.T, n=n, T=T, L=per_block, d0=d0)
    truth = GroundTruth(drifts=drifts, probs=true_probabilities(drifts, design.b), labels=design.cluster_labels())
    return ds, truth
