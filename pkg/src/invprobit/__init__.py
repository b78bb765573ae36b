"""Longitudinal inverse-probit mixed model for categorical learning data.

Categorical responses are modelled as the winner of a race between
drift-diffusion accumulators.  Drift trajectories are B-spline curves with
clustered population effects and subject-level deviations, fitted by a
data-augmentation Gibbs sampler.
"""

__version__ = "0.1.0"

from .diagnostics import (
    Partition,
    adjusted_rand_index,
    autocorrelation,
    coclustering_matrix,
    effective_sample_size,
    geweke,
    point_partition,
    rand_index,
)
from .dists import IGParams, ig_cdf, ig_logpdf, ig_pdf, ig_sample, ig_sf
from .errors import ConfigError, DomainError, IntegrityError, InvProbitError, NumericalError
from .io import (
    dataset_digest,
    read_dataset,
    read_samples,
    summarize,
    write_dataset,
    write_samples,
)
from .model import (
    Dataset,
    DriftField,
    FixedEffects,
    RandomEffects,
    assemble_drifts,
    category_prob_mc,
    category_prob_quad,
    loglik,
)
from .projection import SimplexSpec, project, project_batch
from .sampler import McmcConfig, PosteriorSamples, run_chain, sample_latent_times
from .simulate import SimDesign, Trajectory, default_design, generate
from .splines import SplineBasis, build_basis, eval_basis, penalty_matrix
from .validation import ValidationReport, validation_report

__all__ = [name for name in dir() if not name.startswith("_")]
