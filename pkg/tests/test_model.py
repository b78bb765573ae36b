import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from invprobit.dists import ig_pdf, ig_sf
from invprobit.errors import ConfigError, DomainError
from invprobit.model import (
    Dataset,
    DriftField,
    FixedEffects,
    RandomEffects,
    TrialRecord,
    assemble_drifts,
    category_prob_mc,
    category_prob_mc_batch,
    category_prob_quad,
    loglik,
    project_field,
)
from invprobit.projection import SimplexSpec, project
from invprobit.splines import build_basis

fibers = st.lists(st.floats(0.05, 6.0), min_size=2, max_size=4)


def linear_quad(mu, b, d):
    """Probability by quadrature on the natural time axis (no log transform)."""
    others = np.delete(mu, d)
    f = lambda t: ig_pdf(t, mu[d], b) * np.prod(ig_sf(t, others, b)) if t > 0 else 0.0
    pts = sorted(b / np.asarray(mu))
    return integrate.quad(f, 0, np.inf, limit=500, epsabs=1e-12)[0] if False else (
        integrate.quad(f, 0, pts[-1], points=pts[:-1], limit=500, epsabs=1e-13)[0]
        + integrate.quad(f, pts[-1], np.inf, limit=500, epsabs=1e-13)[0]
    )


def toy_dataset():
    recs = [
        (1, 1, 1, 1, 1),
        (1, 1, 2, 2, 1),
        (1, 2, 1, 2, 2),
        (2, 1, 1, 1, 2),
        (2, 2, 1, 1, 1),
    ]
    return Dataset.from_records(recs)


class TestDataset:
    def test_single_row(self):
        ds = Dataset.from_records([(1, 1, 1, 1, 2)])
        assert (ds.n, ds.T, ds.L, ds.d0) == (1, 1, 1, 2)

    def test_dims_inferred(self):
        ds = toy_dataset()
        assert (ds.n, ds.T, ds.L, ds.d0) == (2, 2, 2, 2)
        assert ds.records[0] == TrialRecord(1, 1, 1, 1, 1)

    def test_out_of_range_names_row(self):
        with pytest.raises(DomainError, match="row 2: stimulus=0"):
            Dataset.from_records([(1, 1, 1, 1, 1), (1, 1, 2, 0, 1)], d0=2)

    def test_duplicate_key(self):
        with pytest.raises(DomainError, match="duplicate"):
            Dataset.from_records([(1, 1, 1, 1, 1), (1, 1, 1, 2, 1)])

    def test_needs_two_categories(self):
        with pytest.raises(DomainError):
            Dataset.from_records([(1, 1, 1, 1, 1)], d0=1)

    def test_inferred_d0_at_least_two(self):
        assert Dataset.from_records([(1, 1, 1, 1, 1)]).d0 == 2

    def test_empty(self):
        with pytest.raises(DomainError):
            Dataset.from_arrays([], [], [], [], [])

    def test_explicit_bounds(self):
        with pytest.raises(DomainError, match="subject=3"):
            Dataset.from_records([(3, 1, 1, 1, 1)], n=2, d0=2)

    def test_frequencies(self):
        f = toy_dataset().response_frequencies()
        assert f.shape == (2, 2, 2, 2)
        assert f[0, 0, 0, 0] == 1.0 and f[1, 0, 1, 0] == 1.0
        assert np.isnan(f[0, 0, 0, 1])

    def test_subset(self):
        ds = toy_dataset()
        sub = ds.subset(ds.subject == 1)
        assert len(sub) == 3 and sub.n == 2


def make_effects(d0=3, K=4, n=2, z_max=4, seed=0, equal=False):
    rng = np.random.default_rng(seed)
    atoms = np.ones((z_max, K)) * 0.7 if equal else rng.normal(1, 0.5, (z_max, K))
    labels = rng.integers(0, z_max, d0 * d0)
    fe = FixedEffects(atoms=atoms, labels=labels, weights=np.full(z_max, 1 / z_max))
    re = RandomEffects.zeros(n, K) if equal else RandomEffects(rng.normal(0, 0.3, (n, K)), rng.normal(0, 0.3, (n, K)))
    return fe, re


class TestAssemble:
    def test_equal_atoms_give_uniform(self):
        fe, re = make_effects(equal=True)
        field = assemble_drifts(fe, re, build_basis(5, K=4, degree=3), SimplexSpec(d0=3, k=3.0))
        np.testing.assert_allclose(field.projected, 1.0, atol=1e-12)

    def test_fibers_on_simplex_and_match_project(self):
        fe, re = make_effects(seed=3)
        basis = build_basis(5, K=4, degree=3)
        spec = SimplexSpec(d0=3, k=2.5, eps=0.05)
        field = assemble_drifts(fe, re, basis, spec)
        np.testing.assert_allclose(field.projected.sum(axis=0), 2.5, atol=1e-10)
        assert field.projected.min() >= 0.05 - 1e-15
        s, i, t = 2, 1, 3
        np.testing.assert_array_equal(field.projected[:, s, i, t], project(field.unconstrained[:, s, i, t], spec))

    def test_unconstrained_formula(self):
        fe, re = make_effects(seed=4)
        basis = build_basis(5, K=4, degree=3)
        field = assemble_drifts(fe, re, basis, SimplexSpec(d0=3))
        B = basis.design_matrix()
        d, s, i, t = 1, 2, 0, 4
        beta = fe.atoms[fe.labels[d * 3 + s]]
        u = re.betaI[i] if d != s else re.betaC[i]
        assert field.unconstrained[d, s, i, t] == pytest.approx(B[t] @ beta + B[t] @ u)
        assert field.unconstrained[2, 2, 1, 0] == pytest.approx(B[0] @ fe.atoms[fe.labels[8]] + B[0] @ re.betaC[1])

    def test_dimension_mismatch(self):
        fe, re = make_effects()
        with pytest.raises(ConfigError):
            assemble_drifts(fe, re, build_basis(5, K=5, degree=3), SimplexSpec(d0=3))
        with pytest.raises(ConfigError):
            assemble_drifts(fe, re, build_basis(5, K=4, degree=3), SimplexSpec(d0=4))

    def test_fixed_effects_validation(self):
        with pytest.raises(ConfigError):
            FixedEffects(atoms=np.zeros((2, 3)), labels=[0, 2], weights=[0.5, 0.5])
        with pytest.raises(ConfigError):
            FixedEffects(atoms=np.zeros((2, 3)), labels=[0, 1], weights=[0.4, 0.5])
        fe = FixedEffects(atoms=np.arange(6.0).reshape(2, 3), labels=[1, 0, 1], weights=[0.5, 0.5])
        np.testing.assert_array_equal(fe.coefficients[0], [3, 4, 5])
        np.testing.assert_array_equal(fe.mu_beta0, np.ones(3))


class TestQuadrature:
    def test_symmetric(self):
        np.testing.assert_allclose(category_prob_quad([1.3, 1.3, 1.3]), 1 / 3, atol=1e-6)

    @given(fibers, st.floats(0.5, 4.0))
    def test_sums_to_one(self, mu, b):
        assert category_prob_quad(mu, b).sum() == pytest.approx(1.0, abs=1e-6)

    def test_two_category_closed_oracle(self):
        mu = np.array([2.0, 1.0])
        assert category_prob_quad(mu, 2.0)[0] == pytest.approx(linear_quad(mu, 2.0, 0), abs=1e-8)

    def test_linear_axis_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            mu = rng.uniform(0.2, 3.0, 3)
            ref = [linear_quad(mu, 2.0, d) for d in range(3)]
            np.testing.assert_allclose(category_prob_quad(mu, 2.0), ref, atol=1e-7)

    @given(fibers, st.sampled_from([0.5, 2.0]))
    def test_scale_invariance(self, mu, c):
        mu = np.array(mu)
        np.testing.assert_allclose(category_prob_quad(c * mu, 2.0 / c), category_prob_quad(mu, 2.0), atol=1e-6)

    @given(fibers, st.integers(0, 3), st.floats(0.05, 1.0))
    def test_monotone_in_own_drift(self, mu, d, bump):
        mu = np.array(mu)
        d = d % mu.size
        up = mu.copy()
        up[d] += bump
        assert category_prob_quad(up)[d] > category_prob_quad(mu)[d]

    def test_injective_on_simplex(self):
        rng = np.random.default_rng(6)
        done = 0
        while done < 100:
            a, b = 4.0 * rng.dirichlet(np.ones(4), size=2)
            if np.abs(a - b).max() < 0.05 or min(a.min(), b.min()) < 0.02:
                continue
            assert np.abs(category_prob_quad(a) - category_prob_quad(b)).max() >= 1e-4
            done += 1

    def test_near_duplicate_drifts(self):
        mu = [1.1187733046820618, 1.7841041750544564, 0.5485612601317549, 0.5485612601317273]
        p = category_prob_quad(mu)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)
        assert p[2] == pytest.approx(p[3], abs=1e-9)

    def test_extreme_fibers(self):
        for mu in ([3.97, 0.01, 0.01, 0.01], [0.01, 0.01, 1.99], [20.0, 0.05]):
            assert category_prob_quad(mu).sum() == pytest.approx(1.0, abs=1e-6)

    def test_invalid(self):
        with pytest.raises(DomainError):
            category_prob_quad([1.0, 0.0])


class TestMonteCarlo:
    def test_symmetric(self, rng):
        M = 2000
        p = category_prob_mc([1.0] * 4, 2.0, M, rng)
        se = np.sqrt(0.25 * 0.75 / M)
        assert np.all(np.abs(p - 0.25) < 3 * se)
        assert p.sum() == 1.0

    def test_two_category_against_quadrature(self, rng):
        p = category_prob_mc([2.0, 1.0], 2.0, 10**5, rng)
        assert p[0] == pytest.approx(linear_quad(np.array([2.0, 1.0]), 2.0, 0), abs=0.01)

    def test_batch_rows_sum_to_one(self, rng):
        p = category_prob_mc_batch(rng.uniform(0.1, 3, (50, 3)), 2.0, 300, rng)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_invalid_M(self, rng):
        with pytest.raises(ConfigError):
            category_prob_mc([1.0, 1.0], 2.0, 0, rng)


def uniform_field(d0, n, T, value=None):
    value = 1.0 if value is None else value
    arr = np.full((d0, d0, n, T), value)
    return DriftField(arr, arr)


class TestLoglik:
    def test_single_trial_uniform(self, rng):
        ds = Dataset.from_records([(1, 1, 1, 1, 3)], d0=4)
        ll = loglik(ds, uniform_field(4, 1, 1), 2.0, 20000, rng)
        assert ll == pytest.approx(np.log(0.25), abs=0.03)

    def test_order_invariant(self):
        ds = toy_dataset()
        perm = np.array([3, 0, 4, 2, 1])
        shuffled = Dataset.from_arrays(*(c[perm] for c in ds.as_matrix().T))
        rng_field = np.random.default_rng(0).uniform(0.3, 1.7, (2, 2, 2, 2))
        field = DriftField(rng_field, project_field(rng_field, SimplexSpec(d0=2)))
        a = loglik(ds, field, 2.0, 5000, np.random.default_rng(1))
        b = loglik(shuffled, field, 2.0, 5000, np.random.default_rng(1))
        assert a == pytest.approx(b, abs=1e-12)

    def test_matches_quadrature(self):
        ds = toy_dataset()
        raw = np.random.default_rng(2).uniform(0.3, 1.7, (2, 2, 2, 2))
        proj = project_field(raw, SimplexSpec(d0=2))
        field = DriftField(raw, proj)
        ll = loglik(ds, field, 2.0, 10**5, np.random.default_rng(3))
        ref = sum(
            np.log(category_prob_quad(proj[:, r.stimulus - 1, r.subject - 1, r.block - 1])[r.response - 1])
            for r in ds.records
        )
        assert abs(ll - ref) < 0.01 * len(ds)

    def test_floor(self, rng):
        ds = Dataset.from_records([(1, 1, 1, 1, 2)], d0=2)
        arr = np.zeros((2, 2, 1, 1))
        arr[0] = 3.99
        arr[1] = 0.01
        ll = loglik(ds, DriftField(arr, arr), 2.0, 100, rng)
        assert np.isfinite(ll) and ll >= np.log(1 / 101)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ConfigError):
            loglik(toy_dataset(), uniform_field(2, 1, 2), 2.0, 10, rng)
