"""Data-augmentation MCMC for the longitudinal inverse-probit mixed model.

Each sweep

1. draws the latent first-passage times of every trial given the projected
   drifts, by accept-reject on the observed winner;
2. updates the cluster labels, the cluster weights and the spline atoms of
   the fixed effects;
3. updates the subject spline coefficients (correct / incorrect);
4. updates the six variance components by log-normal random-walk MH;
5. reassembles and projects the drift field.

Given the latent times, the first-passage log density is
``-mu**2 * tau / 2 + b * mu + const`` in the drift, so every coefficient
vector entering the drift linearly has a Gaussian full conditional.  All such
conditionals are handled in canonical form ``(h, Q)`` with mean ``Q^{-1} h``.

Category probabilities are estimated by race simulation only for iterations
that are stored; they do not feed back into the chain.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dists import dirichlet_sample, half_cauchy_logpdf, ig_sample
from .errors import ConfigError, InvProbitError, NumericalError
from .model import (
    DriftField,
    FixedEffects,
    RandomEffects,
    assemble_drifts,
    category_prob_mc_batch,
    fixed_curves,
    random_curves,
)
from .projection import SimplexSpec
from .splines import build_basis, check_full_rank, penalty_matrix

log = logging.getLogger(__name__)

VARIANCE_NAMES = ("sigma_a2", "sigma_s2", "sigmaC_a2", "sigmaC_s2", "sigmaI_a2", "sigmaI_s2")

# substream tags
_LATENT, _PROB = 1, 2


LABEL_UPDATES = ("collapsed", "conditional")


@dataclass(frozen=True)
class McmcConfig:
    """Run length, hyper-parameters and numerical knobs of one chain.

    ``z_max`` defaults to ``d0**2`` and ``K`` to ``min(T, 6)`` once the dataset
    is known; ``k`` defaults to ``d0``.
    """

    n_iter: int = 5000
    burn_in: int = 2000
    thin: int = 5
    M_prob: int = 2000
    mh_step: float = 0.1
    seed: int = 0
    b: float = 2.0
    eps: float = 0.01
    k: float | None = None
    z_max: int | None = None
    K: int | None = None
    degree: int = 3
    alpha: float = 1.0
    init_variance: float = 0.1
    retry_cap: int = 10**6
    workers: int = 1
    label_update: str = "collapsed"

    def __post_init__(self):
        if self.n_iter < 1 or not (0 <= self.burn_in < self.n_iter):
            raise ConfigError("need 0 <= burn_in < n_iter")
        if self.thin < 1 or self.M_prob < 1:
            raise ConfigError("thin and M_prob must be >= 1")
        if self.mh_step < 0 or self.b <= 0 or self.alpha <= 0 or self.init_variance <= 0:
            raise ConfigError("mh_step, b, alpha and init_variance must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.label_update not in LABEL_UPDATES:
            raise ConfigError(f"label_update must be one of {', '.join(LABEL_UPDATES)}")

    def resolve(self, ds):
        """Fill data-dependent defaults."""
        K = self.K if self.K is not None else min(ds.T, 6)
        return replace(
            self,
            k=float(ds.d0) if self.k is None else float(self.k),
            z_max=ds.d0**2 if self.z_max is None else int(self.z_max),
            K=K,
            degree=min(self.degree, K - 1) if self.K is None else self.degree,
        )

    def simplex(self, d0):
        return SimplexSpec(d0=d0, k=self.k if self.k is not None else float(d0), eps=self.eps)

    @property
    def n_stored(self):
        return len(range(self.burn_in, self.n_iter, self.thin))

    def to_dict(self):
        return asdict(self)


@dataclass
class ChainState:
    latent_times: np.ndarray
    fe: FixedEffects
    re: RandomEffects
    field: DriftField
    iteration: int = 0


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws.

    Arrays carry a leading draw axis of length ``S``.  Drift and probability
    fields are ``[S, d, s, i, t]``.
    """

    config: McmcConfig
    n: int
    T: int
    d0: int
    digest: str
    iterations: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    atoms: np.ndarray
    betaC: np.ndarray
    betaI: np.ndarray
    variances: np.ndarray
    drifts: np.ndarray
    probs: np.ndarray
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return self.iterations.size

    @property
    def x_max(self):
        return self.d0 * self.d0

    def mean_probs(self):
        return self.probs.mean(axis=0)

    def population_drifts(self):
        """Subject-averaged projected drifts, ``[S, d, s, t]``."""
        return self.drifts.mean(axis=3)


# ---------------------------------------------------------------------------
# random streams


def substream(seed, tag, iteration, chunk):
    """Counter-based generator keyed by (seed, purpose, iteration, chunk)."""
    ss = np.random.SeedSequence([int(seed), int(tag), int(iteration), int(chunk)])
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# latent first-passage times


def sample_latent_times_batch(rng, mus, b, winners, retry_cap=10**6):
    """Accept-reject draws of racing times conditioned on the observed winners.

    Proposals are blocks of independent races per trial; the first race in
    proposal order whose minimum sits at the winner is kept, which is the
    same law as sequential rejection.

    Parameters
    ----------
    mus : numpy.ndarray, shape (N, d0)
        Positive drifts of each trial's race.
    winners : numpy.ndarray, shape (N,)
        0-based index of the observed response.

    Returns
    -------
    times : numpy.ndarray, shape (N, d0)
    attempts : numpy.ndarray, shape (N,)
        Number of proposals consumed by each trial.
    """
    mus = np.asarray(mus, dtype=float)
    winners = np.asarray(winners)
    N, d0 = mus.shape
    out = np.empty((N, d0))
    attempts = np.zeros(N, dtype=np.int64)
    pending = np.arange(N)
    r = 1
    while pending.size:
        tau = ig_sample(rng, mus[pending][:, None, :], b, size=(pending.size, r, d0))
        ok = tau.argmin(axis=2) == winners[pending][:, None]
        hit = ok.any(axis=1)
        first = ok.argmax(axis=1)
        acc = pending[hit]
        out[acc] = tau[hit, first[hit]]
        attempts[acc] += first[hit] + 1
        attempts[pending[~hit]] += r
        pending = pending[~hit]
        if pending.size:
            if attempts[pending].max() >= retry_cap:
                bad = pending[np.argmax(attempts[pending])]
                raise NumericalError(
                    f"latent-time sampler exceeded {retry_cap} proposals for drifts "
                    f"{mus[bad].tolist()} with winner {int(winners[bad])}"
                )
            r = int(min(2 * r, max(1, 2**20 // (pending.size * d0)), retry_cap))
    return out, attempts


def sample_latent_times(rng, mu_fiber, b, winner, retry_cap=10**6, return_attempts=False):
    """One conditional draw of the racing times given that ``winner`` finished first."""
    mu = np.asarray(mu_fiber, dtype=float)
    if np.any(~(mu > 0)):
        raise ConfigError("drifts must be positive")
    times, att = sample_latent_times_batch(rng, mu[None, :], b, np.array([winner]), retry_cap)
    if return_attempts:
        return times[0], int(att[0])
    return times[0]


# ---------------------------------------------------------------------------
# fixed design quantities


class _Design:
    """Per-dataset quantities that do not change across iterations."""

    def __init__(self, ds, cfg):
        self.ds = ds
        self.d0, self.n, self.T = ds.d0, ds.n, ds.T
        self.s = ds.stimulus - 1
        self.i = ds.subject - 1
        self.t = ds.block - 1
        self.resp = ds.response - 1
        self.basis = build_basis(ds.T, cfg.K, cfg.degree)
        self.B = check_full_rank(self.basis)
        self.K = self.basis.K
        self.BtB = np.einsum("tk,tl->tkl", self.B, self.B)
        self.P = penalty_matrix(self.K)
        self.P_eig = np.linalg.eigvalsh(self.P)
        self.cell = np.ravel_multi_index((self.s, self.i, self.t), (self.d0, self.n, self.T))
        ncell = self.d0 * self.n * self.T
        self.counts = np.bincount(self.cell, minlength=ncell).reshape(self.d0, self.n, self.T).astype(float)
        self.chunks = [np.flatnonzero(self.i == i) for i in range(self.n)]
        self.b = cfg.b

    def tau_sums(self, latent):
        """``tau[d, s, i, t]``: summed latent time of accumulator ``d`` over trials in cell (s, i, t)."""
        ncell = self.d0 * self.n * self.T
        out = np.empty((self.d0, ncell))
        for d in range(self.d0):
            out[d] = np.bincount(self.cell, weights=latent[:, d], minlength=ncell)
        return out.reshape(self.d0, self.d0, self.n, self.T)

    def prior_precision(self, var_a, var_s):
        return np.eye(self.K) / var_a + self.P / var_s


# ---------------------------------------------------------------------------
# conditional updates


def combination_stats(design, tau, u):
    """Canonical Gaussian likelihood ``(h_x, Q_x)`` of each combination's coefficients.

    ``Q_x = sum_t tau_x(t) B(t)^T B(t)`` and
    ``h_x = sum_t B(t) {b n_x(t) - sum_i u_x^(i)(t) tau_x^(i)(t)}`` where
    ``n_x(t)`` counts trials presented with stimulus ``s`` (each contributes a
    latent time for every accumulator ``d``).
    """
    d0 = design.d0
    tau_x = tau.sum(axis=2)  # [d, s, t]
    n_x = np.broadcast_to(design.counts.sum(axis=1)[None], tau_x.shape)  # [d, s, t]
    Mx = design.b * n_x - (u * tau).sum(axis=2)
    Q = np.einsum("dst,tkl->dskl", tau_x, design.BtB).reshape(d0 * d0, design.K, design.K)
    h = np.einsum("dst,tk->dsk", Mx, design.B).reshape(d0 * d0, design.K)
    return h, Q


def label_log_weights(weights, atoms, h, Q):
    """Unnormalized log ``P(z_x = z)`` for every ``(x, z)``."""
    quad = np.einsum("zk,xkl,zl->xz", atoms, Q, atoms)
    lin = h @ atoms.T
    with np.errstate(divide="ignore"):
        logw = np.log(weights)[None, :]
    return logw - 0.5 * quad + lin


def update_cluster_labels(rng, weights, atoms, h, Q):
    """Draw ``z_x`` for each combination from its discrete full conditional."""
    lw = label_log_weights(weights, atoms, h, Q)
    lw -= lw.max(axis=1, keepdims=True)
    p = np.exp(lw)
    cum = np.cumsum(p, axis=1)
    u = rng.random(p.shape[0]) * cum[:, -1]
    return np.minimum((cum <= u[:, None]).sum(axis=1), p.shape[1] - 1)


def _log_marginal(H, Q):
    """``-0.5 log|Q| + 0.5 H' Q^{-1} H`` for stacks of canonical Gaussians."""
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("cluster precision is not positive definite") from exc
    w = np.linalg.solve(L, H[..., None])[..., 0]
    logdet = 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)
    return -0.5 * logdet + 0.5 * np.sum(w * w, axis=-1)


def update_cluster_labels_collapsed(rng, labels, alpha, z_max, h, Q, prior_prec, mu_beta0):
    """Sequential label draws with the atoms and weights integrated out.

    For each combination in turn,

        P(z_x = z | z_{-x}) ∝ (N_{-x,z} + alpha / z_max) m(A_z + x) / m(A_z)

    where ``m(A)`` is the Gaussian marginal likelihood of the members ``A``
    of cluster ``z`` under the atom prior.  Followed by the usual weight and
    atom draws this is a partially collapsed Gibbs sweep with the same
    stationary law as the conditional update, but a combination can open a
    new cluster without waiting for a prior atom draw to land near its data.
    """
    labels = np.array(labels, dtype=np.int64)
    h0 = prior_prec @ mu_beta0
    Hz, Qz = atom_posterior(labels, h, Q, z_max, prior_prec, mu_beta0)
    counts = np.bincount(labels, minlength=z_max).astype(float)
    for x in range(labels.size):
        z_old = labels[x]
        Hz[z_old] -= h[x]
        Qz[z_old] -= Q[x]
        counts[z_old] -= 1
        if counts[z_old] == 0:
            # reset exactly to the prior so round-off does not accumulate
            Hz[z_old] = h0
            Qz[z_old] = prior_prec
        lw = (
            np.log(counts + alpha / z_max)
            + _log_marginal(Hz + h[x], Qz + Q[x])
            - _log_marginal(Hz, Qz)
        )
        p = np.exp(lw - lw.max())
        cum = np.cumsum(p)
        z = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), z_max - 1)
        labels[x] = z
        Hz[z] += h[x]
        Qz[z] += Q[x]
        counts[z] += 1
    return labels


def weight_posterior_params(labels, alpha, z_max):
    counts = np.bincount(labels, minlength=z_max)
    return alpha / z_max + counts


def update_weights(rng, labels, alpha, z_max):
    """Dirichlet draw of the cluster weights given the labels."""
    return dirichlet_sample(rng, weight_posterior_params(labels, alpha, z_max))


def atom_posterior(labels, h, Q, z_max, prior_prec, mu_beta0):
    """Canonical parameters ``(h_z, Q_z)`` of every atom's Gaussian full conditional."""
    K = prior_prec.shape[0]
    Hz = np.tile(prior_prec @ mu_beta0, (z_max, 1))
    Qz = np.tile(prior_prec, (z_max, 1, 1))
    np.add.at(Hz, labels, h)
    np.add.at(Qz, labels, Q)
    return Hz, Qz.reshape(z_max, K, K)


def mvn_canonical_batch(rng, H, Q):
    """Independent draws from ``N(Q_j^{-1} h_j, Q_j^{-1})`` for each row ``j``."""
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("posterior precision is not positive definite") from exc
    mean = np.linalg.solve(Q, H[..., None])[..., 0]
    z = rng.standard_normal(H.shape)
    noise = np.linalg.solve(np.swapaxes(L, -1, -2), z[..., None])[..., 0]
    return mean + noise, mean


def update_atoms(rng, labels, h, Q, z_max, prior_prec, mu_beta0):
    """Gaussian draw of every atom; empty clusters draw from the prior."""
    Hz, Qz = atom_posterior(labels, h, Q, z_max, prior_prec, mu_beta0)
    draw, _ = mvn_canonical_batch(rng, Hz, Qz)
    return draw


def random_effect_posterior(design, tau, f, prior_C, prior_I):
    """Canonical parameters for ``betaC`` and ``betaI`` of every subject.

    Returns ``(H, Q)`` with shapes ``(2, n, K)`` and ``(2, n, K, K)``; index 0
    is the correct class, 1 the incorrect class.
    """
    d0, b = design.d0, design.b
    diag = np.eye(d0, dtype=bool)
    tau_i = np.moveaxis(tau, 2, 0)  # [i, d, s, t]
    ftau = tau_i * f[None]
    n_it = design.counts.sum(axis=0)  # [i, t]
    tauC = tau_i[:, diag].sum(axis=1)  # [i, t]
    tauI = tau_i[:, ~diag].sum(axis=1)
    ftC = ftau[:, diag].sum(axis=1)
    ftI = ftau[:, ~diag].sum(axis=1)
    mC = b * n_it - ftC
    mI = b * (d0 - 1) * n_it - ftI
    H = np.stack([mC @ design.B, mI @ design.B])
    Q = np.stack(
        [
            prior_C[None] + np.einsum("it,tkl->ikl", tauC, design.BtB),
            prior_I[None] + np.einsum("it,tkl->ikl", tauI, design.BtB),
        ]
    )
    return H, Q


def update_random_effects(rng, design, tau, f, re):
    """Gaussian draws of the subject coefficients for both response classes."""
    prior_C = design.prior_precision(re.sigmaC_a2, re.sigmaC_s2)
    prior_I = design.prior_precision(re.sigmaI_a2, re.sigmaI_s2)
    H, Q = random_effect_posterior(design, tau, f, prior_C, prior_I)
    draw, _ = mvn_canonical_batch(rng, H, Q)
    return draw[0], draw[1]


def variance_log_target(var_a, var_s, coef, center, P_eig, P):
    """Log posterior (up to a constant) of a pair of prior variance components.

    ``coef`` rows are iid ``N(center, (I/var_a + P/var_s)^{-1})``; each variance
    has a standard half-Cauchy prior.
    """
    dev = np.atleast_2d(coef) - center
    m = dev.shape[0]
    logdet = np.sum(np.log(1.0 / var_a + P_eig / var_s))
    ss_a = np.sum(dev * dev)
    ss_s = np.einsum("mk,kl,ml->", dev, P, dev)
    return (
        0.5 * m * logdet
        - 0.5 * (ss_a / var_a + ss_s / var_s)
        + half_cauchy_logpdf(var_a)
        + half_cauchy_logpdf(var_s)
    )


def mh_variance_step(rng, current, log_target, step):
    """One log-normal random-walk MH move; returns ``(value, accepted)``.

    The proposal ``current * exp(step * N(0,1))`` is not symmetric on the
    natural scale; the ratio carries the factor ``proposed / current``.
    """
    proposed = current * np.exp(step * rng.standard_normal())
    log_ratio = log_target(proposed) - log_target(current) + np.log(proposed) - np.log(current)
    if np.log(rng.random()) < log_ratio:
        return proposed, True
    return current, False


def update_variances(rng, fe, re, design, step):
    """MH updates of all six variance components; returns acceptance flags."""
    P, eig = design.P, design.P_eig
    acc = []

    def pair(get, set_, coef, center):
        a, s = get()
        a, ok_a = mh_variance_step(rng, a, lambda v: variance_log_target(v, s, coef, center, eig, P), step)
        s, ok_s = mh_variance_step(rng, s, lambda v: variance_log_target(a, v, coef, center, eig, P), step)
        set_(a, s)
        acc.extend([ok_a, ok_s])

    def set_fe(a, s):
        fe.sigma_a2, fe.sigma_s2 = a, s

    def set_c(a, s):
        re.sigmaC_a2, re.sigmaC_s2 = a, s

    def set_i(a, s):
        re.sigmaI_a2, re.sigmaI_s2 = a, s

    zero = np.zeros(design.K)
    pair(lambda: (fe.sigma_a2, fe.sigma_s2), set_fe, fe.atoms, fe.mu_beta0)
    pair(lambda: (re.sigmaC_a2, re.sigmaC_s2), set_c, re.betaC, zero)
    pair(lambda: (re.sigmaI_a2, re.sigmaI_s2), set_i, re.betaI, zero)
    return np.array(acc)


# ---------------------------------------------------------------------------
# chain driver


class Chain:
    """A single MCMC chain bound to a dataset and a configuration.

    Exposes :meth:`step` for fine-grained use and testing; :func:`run_chain`
    is the usual entry point.
    """

    def __init__(self, ds, config):
        self.config = cfg = config.resolve(ds)
        self.ds = ds
        self.design = _Design(ds, cfg)
        self.spec = cfg.simplex(ds.d0)
        self.rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
        self.state = self._initial_state()
        self._pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        self.accept = np.zeros(6)
        self.latent_attempts = 0

    def _initial_state(self):
        cfg, dz = self.config, self.design
        z_max, K = cfg.z_max, dz.K
        mu0 = np.ones(K)
        fe = FixedEffects(
            atoms=np.tile(mu0, (z_max, 1)),
            labels=self.rng.integers(0, z_max, size=dz.d0 * dz.d0),
            weights=np.full(z_max, 1.0 / z_max),
            alpha=cfg.alpha,
            mu_beta0=mu0,
            sigma_a2=cfg.init_variance,
            sigma_s2=cfg.init_variance,
        )
        v = cfg.init_variance
        re = RandomEffects(np.zeros((dz.n, K)), np.zeros((dz.n, K)), v, v, v, v)
        field_ = assemble_drifts(fe, re, dz.basis, self.spec)
        return ChainState(np.zeros((len(self.ds), dz.d0)), fe, re, field_, 0)

    def _map(self, fn, items):
        if self._pool is None:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    def sample_latent(self):
        dz, cfg, st = self.design, self.config, self.state
        proj = st.field.projected

        def work(i):
            idx = dz.chunks[i]
            if idx.size == 0:
                return idx, np.empty((0, dz.d0)), 0
            mus = proj[:, dz.s[idx], i, dz.t[idx]].T
            rng = substream(cfg.seed, _LATENT, st.iteration, i)
            times, att = sample_latent_times_batch(rng, mus, cfg.b, dz.resp[idx], cfg.retry_cap)
            return idx, times, int(att.sum())

        for idx, times, att in self._map(work, range(dz.n)):
            st.latent_times[idx] = times
            self.latent_attempts += att

    def estimate_probs(self):
        dz, cfg, st = self.design, self.config, self.state
        proj = st.field.projected
        d0 = dz.d0

        def work(i):
            fibers = np.moveaxis(proj[:, :, i, :], 0, -1).reshape(-1, d0)  # [(s, t), d]
            rng = substream(cfg.seed, _PROB, st.iteration, i)
            p = category_prob_mc_batch(fibers, cfg.b, cfg.M_prob, rng)
            return np.moveaxis(p.reshape(d0, dz.T, d0), -1, 0)  # [d, s, t]

        return np.stack(self._map(work, range(dz.n)), axis=2)

    def step(self):
        """One full sweep."""
        st, dz, cfg = self.state, self.design, self.config
        fe, re = st.fe, st.re
        self.sample_latent()
        tau = dz.tau_sums(st.latent_times)
        u = random_curves(re, dz.B, dz.d0)
        h, Q = combination_stats(dz, tau, u)
        prior = dz.prior_precision(fe.sigma_a2, fe.sigma_s2)
        if cfg.label_update == "collapsed":
            fe.labels = update_cluster_labels_collapsed(
                self.rng, fe.labels, fe.alpha, cfg.z_max, h, Q, prior, fe.mu_beta0
            )
        else:
            fe.labels = update_cluster_labels(self.rng, fe.weights, fe.atoms, h, Q)
        fe.weights = update_weights(self.rng, fe.labels, fe.alpha, cfg.z_max)
        fe.atoms = update_atoms(self.rng, fe.labels, h, Q, cfg.z_max, prior, fe.mu_beta0)
        f = fixed_curves(fe, dz.B, dz.d0)
        re.betaC, re.betaI = update_random_effects(self.rng, dz, tau, f, re)
        if cfg.mh_step > 0:
            self.accept += update_variances(self.rng, fe, re, dz, cfg.mh_step)
        else:
            self.accept += 1
        st.field = assemble_drifts(fe, re, dz.basis, self.spec)
        st.iteration += 1

    def run(self, progress=None):
        cfg = self.config
        keep = set(range(cfg.burn_in, cfg.n_iter, cfg.thin))
        rec = {k: [] for k in ("iterations", "labels", "weights", "atoms", "betaC", "betaI", "variances", "drifts", "probs")}
        try:
            for it in range(cfg.n_iter):
                try:
                    self.step()
                    if it in keep:
                        st = self.state
                        rec["iterations"].append(it)
                        rec["labels"].append(st.fe.labels.copy())
                        rec["weights"].append(st.fe.weights.copy())
                        rec["atoms"].append(st.fe.atoms.copy())
                        rec["betaC"].append(st.re.betaC.copy())
                        rec["betaI"].append(st.re.betaI.copy())
                        rec["variances"].append(current_variances(st))
                        rec["drifts"].append(st.field.projected.copy())
                        rec["probs"].append(self.estimate_probs())
                except InvProbitError as exc:
                    raise type(exc)(f"iteration {it}: {exc}") from exc
                if progress is not None:
                    progress(it)
        finally:
            if self._pool is not None:
                self._pool.shutdown()
        from .io import dataset_digest

        n_props = len(self.ds) * cfg.n_iter
        stats = {
            "mh_acceptance": dict(zip(VARIANCE_NAMES, (self.accept / cfg.n_iter).tolist())),
            "latent_acceptance": n_props / max(self.latent_attempts, 1),
        }
        log.info("chain done: %s", stats)
        return PosteriorSamples(
            config=cfg,
            n=self.ds.n,
            T=self.ds.T,
            d0=self.ds.d0,
            digest=dataset_digest(self.ds),
            stats=stats,
            **{k: np.asarray(v) for k, v in rec.items()},
        )


def current_variances(state):
    fe, re = state.fe, state.re
    return np.array([fe.sigma_a2, fe.sigma_s2, re.sigmaC_a2, re.sigmaC_s2, re.sigmaI_a2, re.sigmaI_s2])


def run_chain(ds, config, progress=None):
    """Run one chain and return its thinned post-burn-in draws."""
    return Chain(ds, config).run(progress=progress)
