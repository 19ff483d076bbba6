import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sbperm.errors import DomainError, SizeError
from sbperm.sampler import (SbpSample, batch_by_definition, batch_by_exponential_keys, coupling_permutation,
                            exact_sbp_law, invert_permutation, nested_subsample, order_statistics, ranks,
                            sbp_by_definition, sbp_by_exponential_keys)
from sbperm.verification import chi_square_counts

positive_lists = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8)


def _counts(orders, law):
    idx = {p: i for i, p in enumerate(sorted(law))}
    c = np.zeros(len(idx))
    for row in map(tuple, orders):
        c[idx[row]] += 1
    return c, np.array([law[p] for p in sorted(law)])


class TestExactLaw:
    def test_hand_computed_values(self):
        law = exact_sbp_law([1.0, 2.0, 3.0])
        assert law[(2, 1, 0)] == pytest.approx(3 / 6 * 2 / 3)
        assert law[(0, 1, 2)] == pytest.approx(1 / 6 * 2 / 5)
        assert law[(1, 0, 2)] == pytest.approx(2 / 6 * 1 / 4)
        assert math.fsum(law.values()) == pytest.approx(1.0, abs=1e-15)

    @given(st.lists(st.floats(1e-2, 1e2), min_size=1, max_size=6))
    def test_sums_to_one_and_first_pick_marginal(self, vals):
        law = exact_sbp_law(vals)
        assert math.fsum(law.values()) == pytest.approx(1.0, abs=1e-12)
        total = sum(vals)
        for i, v in enumerate(vals):
            first = math.fsum(p for perm, p in law.items() if perm[0] == i)
            assert first == pytest.approx(v / total, abs=1e-12)

    def test_size_cap(self):
        with pytest.raises(SizeError):
            exact_sbp_law(np.ones(11))

    def test_equal_values_uniform(self):
        law = exact_sbp_law([2.0] * 4)
        assert all(p == pytest.approx(1 / 24) for p in law.values())


class TestSamplers:
    @pytest.mark.parametrize("sampler", [sbp_by_definition, sbp_by_exponential_keys])
    def test_chi_square_against_exact_law(self, sampler):
        rng = np.random.default_rng(11)
        vals = np.array([1.0, 2.0, 3.0])
        law = exact_sbp_law(vals)
        orders = [tuple(sampler(vals, rng).pick_order) for _ in range(30_000)]
        c, p = _counts(orders, law)
        assert chi_square_counts(c, p).passed

    @pytest.mark.parametrize("batch", [batch_by_definition, batch_by_exponential_keys])
    def test_batch_against_exact_law(self, batch):
        rng = np.random.default_rng(5)
        vals = np.array([0.3, 1.0, 2.0, 4.5])
        law = exact_sbp_law(vals)
        c, p = _counts(batch(np.tile(vals, (100_000, 1)), rng), law)
        assert chi_square_counts(c, p).passed

    @given(positive_lists, st.integers(0, 2**32 - 1))
    def test_sample_structure(self, vals, seed):
        rng = np.random.default_rng(seed)
        for sampler in (sbp_by_definition, sbp_by_exponential_keys):
            s = sampler(vals, rng)
            assert sorted(s.pick_order) == list(range(len(vals)))
            np.testing.assert_array_equal(s.values, np.asarray(vals)[s.pick_order])
            assert s.remaining_totals[0] == pytest.approx(sum(vals))
            assert s.remaining_totals[-1] == s.values[-1]
            assert np.all(np.diff(s.remaining_totals) < 0)
            np.testing.assert_array_equal(s.reversed_values, s.values[::-1])

    def test_batch_definition_extreme_weights(self):
        rng = np.random.default_rng(0)
        vals = np.array([1e-300, 1.0, 1e-300, 1e300])
        orders = batch_by_definition(np.tile(vals, (2000, 1)), rng)
        assert np.all(np.sort(orders, axis=1) == np.arange(4))
        assert np.all(orders[:, 0] == 3)

    @pytest.mark.parametrize("bad", [[], [1.0, 0.0], [1.0, -2.0], [1.0, float("inf")], [float("nan")]])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(DomainError):
            sbp_by_definition(bad, np.random.default_rng(0))
        with pytest.raises(DomainError):
            sbp_by_exponential_keys(bad, np.random.default_rng(0))

    def test_same_seed_same_output(self):
        a = sbp_by_exponential_keys([1, 2, 3, 4], np.random.default_rng(9))
        b = sbp_by_exponential_keys([1, 2, 3, 4], np.random.default_rng(9))
        np.testing.assert_array_equal(a.pick_order, b.pick_order)


def test_first_pick_of_one_two():
    rng = np.random.default_rng(12)
    orders = batch_by_exponential_keys(np.tile([1.0, 2.0], (10**6, 1)), rng)
    p = (orders[:, 0] == 1).mean()
    assert abs(p - 2 / 3) < 4 * math.sqrt(2 / 9 / 1e6)


class TestCoupling:
    def test_ranks_and_order_statistics(self):
        x = [3.0, 1.0, 2.0, 1.0]
        np.testing.assert_array_equal(ranks(x), [4, 1, 3, 2])
        np.testing.assert_array_equal(order_statistics(x), [1, 1, 2, 3])

    def test_known_example(self):
        s = SbpSample.from_order([5.0, 1.0, 3.0], [0, 2, 1])
        cp = coupling_permutation(s)
        # X_rev = (1, 3, 5): ranks 1, 2, 3
        np.testing.assert_array_equal(cp.J, [1, 2, 3])
        s = SbpSample.from_order([5.0, 1.0, 3.0], [1, 0, 2])
        cp = coupling_permutation(s)
        np.testing.assert_array_equal(cp.J, [2, 3, 1])
        np.testing.assert_array_equal(cp.K, [3, 1, 2])

    @given(positive_lists, st.integers(0, 2**32 - 1))
    def test_inverse_and_reindexing(self, vals, seed):
        s = sbp_by_exponential_keys(vals, np.random.default_rng(seed))
        cp = coupling_permutation(s)
        n = len(vals)
        np.testing.assert_array_equal(cp.J[cp.K - 1], np.arange(1, n + 1))
        np.testing.assert_array_equal(invert_permutation(cp.K), cp.J)
        # X_rev[k] is the J_k-th order statistic
        np.testing.assert_array_equal(s.reversed_values, order_statistics(vals)[cp.J - 1])


class TestNestedSubsample:
    def test_single_position_is_uniform_over_values(self):
        # a uniformly chosen position of any permutation of (1, 2) holds 2 with probability 1/2
        rng = np.random.default_rng(1)
        hits = 0
        reps = 40_000
        for _ in range(reps):
            s = sbp_by_exponential_keys([1.0, 2.0], rng)
            hits += nested_subsample(s, 1, rng).values[0] == 2.0
        assert abs(hits / reps - 0.5) < 4 * math.sqrt(0.25 / reps)

    def test_structure(self):
        rng = np.random.default_rng(2)
        s = sbp_by_exponential_keys(rng.gamma(1.0, 1.0, 9), rng)
        sub = nested_subsample(s, 4, rng)
        assert sub.n == 4
        # picks keep their relative order
        pos = [int(np.flatnonzero(s.values == v)[0]) for v in sub.values]
        assert pos == sorted(pos)
        assert set(sub.source) <= set(s.source)

    def test_iid_subsample_is_sbp_of_iid(self):
        # nesting: m positions of an s.b.p. of n i.i.d. values form an s.b.p. of m i.i.d. values
        rng = np.random.default_rng(4)
        reps, n, m = 100_000, 6, 3
        nested = np.empty((reps, m))
        for i in range(reps):
            s = sbp_by_exponential_keys(rng.gamma(1.0, 1.0, n), rng)
            nested[i] = nested_subsample(s, m, rng).values
        x = rng.gamma(1.0, 1.0, (reps, m))
        direct = np.take_along_axis(x, batch_by_exponential_keys(x, rng), axis=1)
        level = 0.01 / (m + 1)
        for k in range(m):
            assert stats.ks_2samp(nested[:, k], direct[:, k]).pvalue > level
        assert stats.ks_2samp(nested.sum(1), direct.sum(1)).pvalue > level

    @pytest.mark.parametrize("m", [0, 4])
    def test_bad_m(self, m):
        s = sbp_by_exponential_keys([1.0, 2.0, 3.0], np.random.default_rng(0))
        with pytest.raises(DomainError):
            nested_subsample(s, m, np.random.default_rng(0))
