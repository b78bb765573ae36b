import numpy as np
import pytest

from invprobit.errors import ConfigError
from invprobit.model import category_prob_quad
from invprobit.simulate import SimDesign, Trajectory, default_design, generate, true_probabilities


@pytest.fixture(scope="module")
def reduced():
    design = default_design(seed=11, n=4, T=4, L=100)
    ds, truth = generate(design)
    return design, ds, truth


class TestDefaultDesign:
    def test_cluster_sizes(self):
        d = default_design()
        assert (d.n, d.T, d.L, d.d0, d.b) == (20, 10, 40, 4, 2.0)
        assert sorted(len(v) for v in d.clusters.values()) == [2, 2, 6, 6]
        assert np.bincount(d.cluster_labels()).tolist() == [2, 2, 6, 6]

    def test_listed_clusters(self):
        d = default_design()
        assert d.clusters["S1"] == [(1, 1), (2, 2)]
        assert d.clusters["S2"] == [(3, 3), (4, 4)]

    def test_positive_on_grid(self):
        d = default_design()
        assert np.all(d.population_drifts() > 0)

    def test_off_constraint(self):
        d = default_design()
        sums = d.population_drifts().sum(axis=0)  # [s, t]
        assert np.all(np.abs(sums - d.d0) >= 0.5)

    def test_shapes_of_curves(self):
        d = default_design()
        grid = np.arange(1, d.T + 1)
        for name in ("S1", "S2"):
            assert np.all(np.diff(d.curves[name](grid, d.T)) > 0)
        assert np.all(d.curves["M1"](grid, d.T) > d.curves["M2"](grid, d.T))


class TestDesignValidation:
    def test_trajectory_endpoints(self):
        c = Trajectory(1.0, 3.0, 2.0)
        assert c(1, 5) == pytest.approx(1.0)
        assert c(5, 5) == pytest.approx(3.0)
        assert Trajectory(1.0, 3.0, 0.0)(3, 5) == pytest.approx(2.0)

    def test_clusters_must_partition(self):
        d = default_design()
        clusters = dict(d.clusters, S1=[(1, 1)])
        with pytest.raises(ConfigError):
            SimDesign(n=2, T=2, L=1, d0=4, clusters=clusters, curves=d.curves)

    def test_nonpositive_trajectory(self):
        d = default_design()
        curves = dict(d.curves, M2=Trajectory(0.5, -0.1, 0.0))
        with pytest.raises(ConfigError):
            SimDesign(n=2, T=3, L=1, d0=4, clusters=d.clusters, curves=curves)

    @pytest.mark.parametrize("kw", [dict(n=0), dict(T=0), dict(L=0), dict(d0=1)])
    def test_bad_dimensions(self, kw):
        d = default_design()
        with pytest.raises(ConfigError):
            SimDesign(**{**dict(n=1, T=2, L=1, d0=4, clusters=d.clusters, curves=d.curves), **kw})


class TestGenerate:
    def test_balanced_schedule(self, reduced):
        design, ds, _ = reduced
        assert len(ds) == design.n * design.T * design.d0 * design.L
        counts = np.zeros((design.n, design.T, design.d0), dtype=int)
        np.add.at(counts, (ds.subject - 1, ds.block - 1, ds.stimulus - 1), 1)
        assert np.all(counts == design.L)
        ds.validate()

    def test_truth_shapes(self, reduced):
        design, _, truth = reduced
        shape = (design.d0, design.d0, design.n, design.T)
        assert truth.drifts.shape == truth.probs.shape == shape
        np.testing.assert_allclose(truth.probs.sum(axis=0), 1.0, atol=1e-6)
        assert truth.drifts.min() >= design.floor
        np.testing.assert_array_equal(truth.labels, design.cluster_labels())

    def test_frequencies_within_binomial_band(self, reduced):
        """Subject-pooled frequencies per (s, t) within 4 binomial SE of the truth."""
        design, ds, truth = reduced
        freq = np.nanmean(ds.response_frequencies(), axis=2)
        p = truth.probs.mean(axis=2)
        m = design.n * design.L
        se = np.sqrt(np.maximum(p * (1 - p), 1.0 / m) / m)
        assert np.max(np.abs(freq - p) / se) < 4.0

    def test_equal_drifts_uniform(self):
        d = default_design()
        flat = {k: Trajectory(1.0, 1.0, 0.0) for k in d.curves}
        design = SimDesign(n=2, T=2, L=500, d0=4, clusters=d.clusters, curves=flat, subject_effect_sd=0.0, seed=3)
        ds, truth = generate(design)
        np.testing.assert_allclose(truth.probs, 0.25, atol=1e-6)
        freq = np.nanmean(ds.response_frequencies(), axis=2)
        m = design.n * design.L
        assert np.max(np.abs(freq - 0.25)) < 3 * np.sqrt(0.25 * 0.75 / m)

    def test_large_L_convergence(self):
        """Subject-pooled frequencies at L = 4000 within 0.01 of the truth (about 5 SE)."""
        design = default_design(seed=5, n=8, T=2, L=4000)
        ds, truth = generate(design)
        freq = ds.response_frequencies().mean(axis=2)
        assert np.max(np.abs(freq - truth.probs.mean(axis=2))) < 0.01

    def test_truth_matches_quadrature(self, reduced):
        design, _, truth = reduced
        fiber = truth.drifts[:, 2, 1, 3]
        np.testing.assert_allclose(truth.probs[:, 2, 1, 3], category_prob_quad(fiber, design.b))

    def test_true_probabilities_reuses_duplicates(self):
        drifts = np.ones((3, 3, 2, 2))
        np.testing.assert_allclose(true_probabilities(drifts, 2.0), 1.0 / 3, atol=1e-8)

    def test_deterministic(self):
        design = default_design(seed=4, n=2, T=2, L=5)
        a, ta = generate(design)
        b, tb = generate(design)
        np.testing.assert_array_equal(a.as_matrix(), b.as_matrix())
        np.testing.assert_array_equal(ta.probs, tb.probs)

    def test_seed_matters(self):
        a, _ = generate(default_design(seed=1, n=2, T=2, L=5))
        b, _ = generate(default_design(seed=2, n=2, T=2, L=5))
        assert not np.array_equal(a.as_matrix(), b.as_matrix())

    def test_no_subject_effects(self):
        design = default_design(seed=1, n=3, T=3, L=1, subject_effect_sd=0.0)
        _, truth = generate(design)
        pop = design.population_drifts()
        for i in range(3):
            np.testing.assert_allclose(truth.drifts[:, :, i, :], np.maximum(pop, design.floor))
