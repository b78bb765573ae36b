"""Recovery metrics of a fit against simulation ground truth."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import adjusted_rand_index, point_partition, rand_index
from .errors import DomainError
from .io import interval


@dataclass(frozen=True)
class ValidationReport:
    """Probability MSE, partition agreement and interval coverage.

    ``coverage_interior`` drops cells whose true probability lies outside
    ``[edge, 1 - edge]``, where intervals of a bounded quantity are known to
    under-cover.
    """

    mse: float
    rand_index: float
    adjusted_rand_index: float
    coverage: float
    coverage_interior: float
    level: float
    edge: float
    n_cells: int
    n_interior: int

    def to_dict(self):
        return asdict(self)


def validation_report(samples, truth, level=0.95, edge=0.05):
    """Compare posterior draws with a :class:`~invprobit.simulate.GroundTruth`."""
    if truth.probs.shape != samples.probs.shape[1:]:
        raise DomainError(
            f"truth shape {truth.probs.shape} does not match samples {samples.probs.shape[1:]}"
        )
    if truth.labels.size != samples.x_max:
        raise DomainError("truth has no cluster labels for every combination")
    mean = samples.probs.mean(axis=0)
    lo, hi = interval(samples.probs, level)
    covered = (lo <= truth.probs) & (truth.probs <= hi)
    interior = (truth.probs >= edge) & (truth.probs <= 1.0 - edge)
    part = point_partition(samples.labels)
    return ValidationReport(
        mse=float(np.mean((mean - truth.probs) ** 2)),
        rand_index=rand_index(part, truth.labels),
        adjusted_rand_index=adjusted_rand_index(part, truth.labels),
        coverage=float(covered.mean()),
        coverage_interior=float(covered[interior].mean()) if interior.any() else float("nan"),
        level=level,
        edge=edge,
        n_cells=int(covered.size),
        n_interior=int(interior.sum()),
    )
