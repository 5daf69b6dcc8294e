import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dbsurf.oracle import enumerate_categorical_law, enumerate_path_law
from dbsurf.sampler import (
    FiniteSupport,
    SamplerConfig,
    SamplerState,
    TailGroupedSupport,
    db_sample_bernoulli,
    db_sample_bernoulli_batch,
    db_sample_categorical,
    db_sample_finite_support,
    db_sample_infinite_support,
    group_tail,
    group_tail_scipy,
    iid_sample,
    iid_sample_categorical,
)

from .reference_dbsample import DBsample


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SamplerConfig(0)
        with pytest.raises(ValueError):
            SamplerConfig(2, alpha=-1.0)
        with pytest.raises(ValueError):
            SamplerConfig(2, alpha=float("inf"))

    def test_default_alpha_is_one(self):
        assert SamplerConfig(3).alpha == 1.0


class TestIID:
    def test_degenerate(self):
        np.testing.assert_array_equal(iid_sample([1.0], SamplerConfig(7)), np.ones((7, 1)))
        np.testing.assert_array_equal(iid_sample([0.0], SamplerConfig(7)), np.zeros((7, 1)))

    def test_mean_half(self):
        x = iid_sample([0.5], SamplerConfig(10**6, seed=3))
        assert abs(x.mean() - 0.5) < 0.005


class TestBernoulliDBsample:
    def test_first_state(self):
        s = SamplerState([0.3, 0.6], 1.0, np.random.default_rng(0))
        np.testing.assert_array_equal(s.q, [0.3, 0.6])
        np.testing.assert_array_equal(s.p_hat, [0.3, 0.6])
        assert s.step == 0

    @pytest.mark.parametrize("seed", range(20))
    def test_antithetic_pair(self, seed):
        x = db_sample_bernoulli([0.5], SamplerConfig(2, 1.0, seed))
        assert x[1, 0] == 1.0 - x[0, 0]

    @pytest.mark.parametrize("seed", range(20))
    def test_zero_discrepancy_pair(self, seed):
        x = db_sample_bernoulli([0.5, 0.5], SamplerConfig(2, 1.0, seed))
        np.testing.assert_array_equal(x.mean(axis=0), [0.5, 0.5])

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=4), st.integers(1, 12),
           st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_alpha_zero_bit_identical_to_iid(self, p, n, seed):
        a = db_sample_bernoulli(p, SamplerConfig(n, 0.0, seed))
        b = iid_sample(p, SamplerConfig(n, 0.0, seed))
        np.testing.assert_array_equal(a, b)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=3), st.floats(0, 10),
           st.integers(1, 10), st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_q_stays_in_unit_interval(self, p, alpha, n, seed):
        s = SamplerState(p, alpha, np.random.default_rng(seed))
        for _ in range(n):
            s.draw()
            assert np.all((s.q >= 0) & (s.q <= 1))

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 5.0])
    def test_degenerate_coordinates_stay_fixed(self, alpha):
        x = db_sample_bernoulli([0.0, 1.0, 0.5], SamplerConfig(9, alpha, 1))
        np.testing.assert_array_equal(x[:, 0], 0.0)
        np.testing.assert_array_equal(x[:, 1], 1.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_reference_stream(self, seed):
        rs = np.random.RandomState(seed)
        p = rs.uniform(size=rs.randint(1, 4))
        alpha, n = float(rs.uniform(0, 3)), int(rs.randint(1, 11))
        np.random.seed(seed + 1000)
        ref = DBsample(p, n, alpha)
        ours = db_sample_bernoulli(p, SamplerConfig(n, alpha), np.random.RandomState(seed + 1000))
        np.testing.assert_array_equal(ours, ref)

    @pytest.mark.parametrize("p,alpha,n", [(0.3, 0.4, 4), (0.7, 1.0, 5), (0.5, 2.0, 6)])
    def test_batch_matches_enumerated_law(self, p, alpha, n):
        reps = 10**6
        x = db_sample_bernoulli_batch([p], SamplerConfig(n, alpha, 11), reps)[:, :, 0]
        codes = (x * (2 ** np.arange(n - 1, -1, -1))).sum(axis=1).astype(int)
        freq = np.bincount(codes, minlength=2**n) / reps
        law = enumerate_path_law(p, alpha, n)
        law_codes = (law.paths * (2 ** np.arange(n - 1, -1, -1))).sum(axis=1).astype(int)
        expected = np.zeros(2**n)
        expected[law_codes] = law.probs
        sigma = np.sqrt(expected * (1 - expected) / reps)
        assert np.all(np.abs(freq - expected) <= 3 * sigma + 1e-12)

    def test_sequential_frequencies_match_law(self):
        # the sequential sampler itself, at lower replication
        p, alpha, n, reps = 0.35, 0.8, 3, 20000
        rng = np.random.default_rng(5)
        cfg = SamplerConfig(n, alpha)
        counts = {}
        for _ in range(reps):
            key = tuple(int(v) for v in db_sample_bernoulli([p], cfg, rng)[:, 0])
            counts[key] = counts.get(key, 0) + 1
        for path, w in enumerate_path_law(p, alpha, n).as_dict().items():
            sigma = np.sqrt(w * (1 - w) / reps)
            assert abs(counts.get(path, 0) / reps - w) <= 4 * sigma + 1e-12


def _bernoulli_law_as_category_zero(p, alpha, n):
    law = enumerate_path_law(p, alpha, n)
    return {tuple(0 if v else 1 for v in path): w for path, w in law.as_dict().items()}


class TestCategoricalDBsample:
    @pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.8])
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0, 3.0])
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_two_categories_match_bernoulli(self, p, alpha, n):
        paths, probs = enumerate_categorical_law([p, 1 - p], alpha, n)
        cat = {tuple(int(v) for v in path): w for path, w in zip(paths, probs)}
        bern = _bernoulli_law_as_category_zero(p, alpha, n)
        for key, w in bern.items():
            assert cat[key] == pytest.approx(w, abs=1e-12)

    def test_two_categories_draw_level(self):
        # category 0 is drawn exactly when the Bernoulli draw with q = p[0] succeeds
        for seed in range(30):
            cat = db_sample_categorical([0.3, 0.7], SamplerConfig(6, 1.0), np.random.default_rng(seed))
            bern = db_sample_bernoulli([0.3], SamplerConfig(6, 1.0), np.random.default_rng(seed))
            np.testing.assert_array_equal(cat[:, 0], bern[:, 0])

    def test_uniform_row_preserves_marginals(self):
        m, n, alpha = 3, 2, 0.5
        paths, probs = enumerate_categorical_law([1 / m] * m, alpha, n)
        onehot = np.eye(m)[paths]
        means = np.einsum("s,snm->m", probs, onehot) / n
        np.testing.assert_allclose(means, 1 / m, atol=1e-12)

    def test_alpha_zero_is_iid(self):
        paths, probs = enumerate_categorical_law([0.2, 0.5, 0.3], 0.0, 3)
        expected = np.prod(np.array([0.2, 0.5, 0.3])[paths], axis=1)
        np.testing.assert_allclose(probs, expected, atol=1e-15)

    def test_shapes_and_one_hot(self):
        rows = np.array([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]])
        x = db_sample_categorical(rows, SamplerConfig(5, 1.0, 2))
        assert x.shape == (5, 2, 3)
        np.testing.assert_array_equal(x.sum(axis=-1), 1.0)
        assert db_sample_categorical(rows[0], SamplerConfig(4)).shape == (4, 3)

    def test_iid_helper(self):
        a = iid_sample_categorical([0.5, 0.5], SamplerConfig(4, 1.0, 3))
        b = db_sample_categorical([0.5, 0.5], SamplerConfig(4, 0.0, 3))
        np.testing.assert_array_equal(a, b)

    def test_rejects_invalid_row(self):
        with pytest.raises(ValueError):
            db_sample_categorical([0.5, 0.6], SamplerConfig(2))


class TestFiniteSupport:
    @pytest.mark.parametrize("seed", range(20))
    def test_symmetric_pair_cancels(self, seed):
        s = FiniteSupport((-1.0, 1.0), (0.5, 0.5))
        assert db_sample_finite_support(s, SamplerConfig(2, 1.0, seed)).sum() == 0.0

    def test_single_atom(self):
        out = db_sample_finite_support(FiniteSupport((3.5,), (1.0,)), SamplerConfig(6))
        np.testing.assert_array_equal(out, 3.5)

    @pytest.mark.parametrize("p", [0.2, 0.5, 0.9])
    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_zero_one_atoms_equal_bernoulli_in_law(self, p, alpha):
        # atoms (0, 1) with probs (1 - p, p): the value is 1 exactly when category 1 is drawn
        n = 4
        paths, probs = enumerate_categorical_law([1 - p, p], alpha, n)
        law_cat = {tuple(int(v) for v in path): w for path, w in zip(paths, probs)}
        law_bern = enumerate_path_law(p, alpha, n).as_dict()
        for key, w in law_bern.items():
            assert law_cat[key] == pytest.approx(w, abs=1e-12)

    def test_duplicate_atoms_rejected(self):
        with pytest.raises(ValueError):
            FiniteSupport((1.0, 1.0), (0.5, 0.5))


class TestInfiniteSupport:
    def test_poisson_head_and_mean(self):
        support = group_tail_scipy(stats.poisson(2.0), 1e-6)
        assert sum(support.head_probs) >= 1 - 1e-6
        n = 10**5
        x = db_sample_infinite_support(support, SamplerConfig(n, 0.0, 4))
        assert abs(x.mean() - 2.0) <= 3 * np.sqrt(2.0 / n)

    def test_geometric_grouping(self):
        support = group_tail_scipy(stats.geom(0.5), 0.25)
        assert support.atoms == (1.0, 2.0)
        assert support.tail_prob == pytest.approx(0.25, abs=1e-12)

    def test_tail_draws_come_from_tail(self):
        support = group_tail_scipy(stats.geom(0.5), 0.25)
        x = db_sample_infinite_support(support, SamplerConfig(4000, 1.0, 9))
        assert set(np.unique(x[x > 2])) <= set(range(3, 200))
        assert np.all(x >= 1)
        assert np.any(x > 2)

    def test_finite_case_matches_finite_sampler(self):
        support = TailGroupedSupport((0.0, 1.0, 2.0), (0.25, 0.5, 0.25), 0.0, None, 0.1)
        finite = FiniteSupport((0.0, 1.0, 2.0), (0.25, 0.5, 0.25))
        for seed in range(10):
            cfg = SamplerConfig(7, 1.0, seed)
            np.testing.assert_array_equal(db_sample_infinite_support(support, cfg),
                                          db_sample_finite_support(finite, cfg))

    def test_tail_sampler_required(self):
        with pytest.raises(ValueError):
            TailGroupedSupport((0.0,), (0.5,), 0.5)

    def test_tail_sampler_errors_propagate(self):
        def broken(rng):
            raise RuntimeError("tail failure")

        support = group_tail(lambda k: 0.5 ** (k + 1), 0, 0.3, broken)
        with pytest.raises(RuntimeError):
            db_sample_infinite_support(support, SamplerConfig(200, 0.0, 0))
