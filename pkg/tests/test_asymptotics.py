import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from sbperm.asymptotics import (LimitSample, finite_last_pick, finite_last_picks, j1_moments, j1_pmf, j1_tail, jk_conditional_law,
                                k1_partial_expectation, k1_pmf, kj_conditional_law, limit_j_prefix, limit_k1,
                                limit_process, limit_sbp_sample, mark_of, mu_density, mu_density_without_t_factor,
                                prob_last_pick_is_min, rect_mass, upper_tail_mass)
from sbperm.dist_models import GammaModel
from sbperm.errors import DomainError, ResourceError
from sbperm.verification import chi_square_counts, ks_two_sample

P_LAST_IS_MIN = 0.5552284587
# 30-digit value from arbitrary precision quadrature
P_LAST_IS_MIN_HP = 0.555228458706143577354


def _closed_rect(s0, s1, t0, t1, a):
    # mu((0, s) x (0, t)) = t P(a, r(s, t))
    def corner(s, t):
        return t * special.gammainc(a, float(mark_of(s, t, a))) if s > 0 and t > 0 else 0.0
    return corner(s1, t1) - corner(s0, t1) - corner(s1, t0) + corner(s0, t0)


class TestIntensity:
    @pytest.mark.parametrize("a", [0.5, 1.0, 2.5])
    def test_marginals_are_lebesgue(self, a):
        for s in (0.3, 2.0):
            v, _ = integrate.quad(lambda t: float(mu_density(s, t, a)), 0, np.inf, limit=400)
            assert v == pytest.approx(1.0, abs=1e-7)
        for t in (0.3, 2.0):
            v, _ = integrate.quad(lambda s: float(mu_density(s, t, a)), 0, np.inf, limit=400)
            assert v == pytest.approx(1.0, abs=1e-7)

    def test_density_without_t_factor_at_one(self):
        s, t = 1.3, 0.6
        assert float(mu_density_without_t_factor(s, t, 1.0)) == pytest.approx(s / t * math.exp(-s / t))

    def test_density_without_t_factor_has_wrong_marginal(self):
        t = 3.0
        v, _ = integrate.quad(lambda s: float(mu_density_without_t_factor(s, t, 1.0)), 0, np.inf)
        assert v == pytest.approx(t, rel=1e-7)

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.5])
    def test_rect_mass_closed_form(self, a):
        for s0, s1, t0, t1 in [(0, 1, 0, 1), (0.5, 2, 0.2, 3), (1, 5, 2, 2.5), (0, 0.1, 4, 9)]:
            assert rect_mass((s0, s1), (t0, t1), a) == pytest.approx(_closed_rect(s0, s1, t0, t1, a), abs=1e-10)

    def test_rect_mass_against_double_integral(self):
        v, _ = integrate.dblquad(lambda t, s: float(mu_density(s, t, 1.7)), 0.5, 2.0, 0.3, 1.1)
        assert rect_mass((0.5, 2.0), (0.3, 1.1), 1.7) == pytest.approx(v, rel=1e-7)

    def test_rect_mass_edges(self):
        assert rect_mass((0, 3), (0, math.inf), 1.3) == pytest.approx(3.0)
        assert rect_mass((0, math.inf), (0, 2), 0.8) == pytest.approx(2.0)
        assert rect_mass((1, 1), (0, 5), 1.0) == 0.0
        assert rect_mass((0, math.inf), (0, math.inf), 1.0) == math.inf
        with pytest.raises(DomainError):
            rect_mass((-1, 1), (0, 1), 1.0)

    def test_upper_tail_mass(self):
        for s, t in [(1.0, 2.0), (5.0, 0.5)]:
            assert float(upper_tail_mass(s, t, 1.4)) == pytest.approx(rect_mass((s, math.inf), (0, t), 1.4), rel=1e-9)

    def test_rect_mass_poisson_counts(self):
        # S-side simulation: gaps and marks are standard exponentials
        rng = np.random.default_rng(5)
        a, reps, npts = 1.5, 20_000, 40
        s = np.cumsum(rng.standard_exponential((reps, npts)), axis=1)
        r = rng.standard_exponential((reps, npts))
        t = special.gamma(a + 1) * s * r ** (-a)
        box = (s > 0.5) & (s < 3.0) & (t > 1.0) & (t < 4.0)
        c = box.sum(1)
        m = rect_mass((0.5, 3.0), (1.0, 4.0), a)
        assert abs(c.mean() - m) < 4 * math.sqrt(m / reps)
        assert c.var() == pytest.approx(m, rel=0.05)


class TestConditionalLaws:
    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 3.5])
    def test_rect_matches_closed(self, a):
        for j, s, r in [(1, 0.5, 0.3), (3, 2.0, 1.2), (5, 1.0, 4.0)]:
            law = kj_conditional_law(j, s, r, a)
            assert law.binomial_n == j - 1
            assert law.poisson_mean == pytest.approx(law.poisson_mean_closed, rel=1e-8)
            assert law.binomial_p == pytest.approx(law.binomial_p_closed, rel=1e-8)
            law = jk_conditional_law(j, s, r, a)
            assert law.poisson_mean == pytest.approx(law.poisson_mean_closed, rel=1e-8, abs=1e-12)
            assert law.binomial_p == pytest.approx(law.binomial_p_closed, rel=1e-8)

    def test_exponential_closed_forms(self):
        s, t, r = 1.3, 0.7, 0.9
        law = kj_conditional_law(2, s, r, 1.0)
        assert law.poisson_mean_closed == pytest.approx(s * math.exp(-r) / r)
        assert law.binomial_p_closed == pytest.approx((1 - math.exp(-r)) / r)
        law = jk_conditional_law(2, t, r, 1.0)
        assert law.poisson_mean_closed == pytest.approx(t * (r - 1 + math.exp(-r)))
        assert law.binomial_p_closed == pytest.approx(1 - math.exp(-r))

    def test_alternative_forms_agree_only_at_one(self):
        kj = kj_conditional_law(3, 0.7, 1.1, 1.0)
        jk = jk_conditional_law(3, 0.7, 1.1, 1.0)
        assert kj.binomial_p_alternative == pytest.approx(kj.binomial_p_closed)
        assert jk.binomial_p_alternative == pytest.approx(jk.binomial_p_closed)
        kj = kj_conditional_law(3, 0.1, 1.0, 2.0)
        assert not kj.alternative_p_in_range
        assert kj.binomial_p_alternative != pytest.approx(kj.binomial_p_closed)

    def test_pmf_sums_to_one(self):
        law = kj_conditional_law(4, 1.0, 0.8, 1.5)
        p = law.pmf(200)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.dot(np.arange(201), p) == pytest.approx(law.poisson_mean + 3 * law.binomial_p, rel=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            kj_conditional_law(0, 1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            jk_conditional_law(1, -1.0, 1.0, 1.0)


class TestK1J1:
    def test_constant_by_direct_quadrature(self):
        ref, _ = integrate.quad(lambda u: u / (u - math.log(u)), 0, 1, epsabs=1e-15, epsrel=1e-13, limit=500)
        assert prob_last_pick_is_min() == pytest.approx(1 - ref, abs=1e-12)
        assert prob_last_pick_is_min() == pytest.approx(P_LAST_IS_MIN_HP, abs=1e-12)
        assert prob_last_pick_is_min() == pytest.approx(P_LAST_IS_MIN, abs=1e-9)

    def test_first_values_agree(self):
        assert k1_pmf(1) == pytest.approx(prob_last_pick_is_min(), abs=1e-10)
        assert j1_pmf(1) == pytest.approx(prob_last_pick_is_min(), abs=1e-10)

    def test_k1_against_geometric_mixture(self):
        for k in (2, 7, 40):
            ref, _ = integrate.quad(
                lambda r: r / (r + math.exp(-r)) * (math.exp(-r) / (r + math.exp(-r))) ** (k - 1) * math.exp(-r),
                0, np.inf, limit=400, epsabs=1e-15)
            assert k1_pmf(k) == pytest.approx(ref, rel=1e-7)

    def test_k1_heavy_tail(self):
        total = math.fsum(k1_pmf(k) for k in range(1, 10_001))
        assert 1 - 5e-3 < total < 1
        assert k1_partial_expectation(10**6) - k1_partial_expectation(10**3) > 1
        assert k1_partial_expectation(50) == pytest.approx(math.fsum(k * k1_pmf(k) for k in range(1, 51)), rel=1e-8)

    def test_j1_mass_and_mean(self):
        mass, mean = j1_moments()
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert mean == pytest.approx(9 / 4, abs=1e-8)
        head = math.fsum(j1_pmf(j) for j in range(1, 101))
        tail_mass, _ = j1_tail(100)
        assert head + tail_mass == pytest.approx(1.0, abs=1e-9)

    def test_bad_index(self):
        with pytest.raises(DomainError):
            k1_pmf(0)
        with pytest.raises(DomainError):
            j1_pmf(0)


class TestLimitProcess:
    def test_invariants(self):
        proc = limit_process(1.5, 2.0, 10, 1e-6, np.random.default_rng(3))
        assert np.all(np.diff(proc.t) >= 0)
        np.testing.assert_allclose(proc.s * special.gamma(2.5), proc.t * proc.gammas**1.5, rtol=1e-12)
        assert np.all(np.diff(proc.s_sorted) > 0)
        assert proc.truncation_bound <= 1e-6
        assert sorted(proc.J) == sorted(set(proc.J))
        # J_k is the s-rank of the k-th smallest t
        np.testing.assert_array_equal(proc.s_sorted[proc.J - 1], proc.s[:10])
        # K restricted to indices inside the J prefix inverts it
        for j, k in enumerate(proc.K, start=1):
            if k <= 10:
                assert proc.J[k - 1] == j

    def test_tighter_eps_extends_same_prefix(self):
        for seed in range(200):
            p6 = limit_process(1.0, 1.0, 5, 1e-6, np.random.default_rng(seed))
            p9 = limit_process(1.0, 1.0, 5, 1e-9, np.random.default_rng(seed))
            np.testing.assert_array_equal(p6.J, p9.J)
            np.testing.assert_array_equal(p6.s_sorted, p9.s_sorted[:p6.s_sorted.size])

    def test_certified_prefix_matches_tighter_run(self):
        # 10^4 replicas certified on J and K for k <= 3, identical to the eps = 1e-9 rerun
        agree = 0
        for seed in range(10_000):
            p6 = limit_process(1.0, 1.0, 3, 1e-6, np.random.default_rng(seed), certify_k=True)
            p9 = limit_process(1.0, 1.0, 3, 1e-9, np.random.default_rng(seed), certify_k=True)
            agree += (p6.K.size == 3 and np.array_equal(p6.J, p9.J) and np.array_equal(p6.K, p9.K[:3]))
        assert agree >= 9999

    def test_certify_k(self):
        proc = limit_process(1.0, 1.0, 6, 1e-6, np.random.default_rng(1), certify_k=True)
        assert proc.K.size == 6
        assert proc.k_bound <= 1e-6

    @pytest.mark.parametrize("a", [1.0, 2.0])
    def test_unit_interval_counts_are_independent_poisson(self, a):
        rng = np.random.default_rng(9)
        reps = 10_000
        edges = np.arange(4.0)
        s_counts = np.empty((reps, 3))
        t_counts = np.empty((reps, 3))
        for i in range(reps):
            proc = limit_process(a, 1.0, 15, 1e-6, rng)
            assert proc.t[14] > 3.0
            s_counts[i] = np.histogram(proc.s_sorted, edges)[0]
            t_counts[i] = np.histogram(proc.t[:15], edges)[0]
        pois = stats.poisson.pmf(np.arange(6), 1.0)
        pois = np.append(pois, 1 - pois.sum())
        for c in (s_counts, t_counts):
            for j in range(3):
                obs = np.bincount(np.minimum(c[:, j].astype(int), 6), minlength=7)
                assert chi_square_counts(obs, pois, 0.01 / 12).passed
            corr = np.corrcoef(c.T)
            assert np.all(np.abs(corr[np.triu_indices(3, 1)]) < 4 / math.sqrt(reps))

    def test_resource_error(self):
        with pytest.raises(ResourceError) as e:
            limit_process(1.0, 1.0, 5, 1e-9, np.random.default_rng(0), max_points=30)
        assert e.value.achieved is not None

    @pytest.mark.parametrize("kw", [dict(a=0.0), dict(eps=0.0), dict(eps=1.0), dict(k_max=0), dict(lam=-1.0)])
    def test_domain(self, kw):
        args = dict(a=1.0, lam=1.0, k_max=3, eps=1e-6)
        args.update(kw)
        with pytest.raises(DomainError):
            limit_process(args["a"], args["lam"], args["k_max"], args["eps"], np.random.default_rng(0))

    def test_sample_coupling(self):
        proc = limit_process(2.0, 1.0, 8, 1e-6, np.random.default_rng(4))
        ls = LimitSample.from_process(proc)
        np.testing.assert_allclose(ls.xi_sbp, ls.xi_order[proc.J - 1], rtol=1e-12)
        assert np.all(np.diff(ls.xi_order) > 0)


class TestLimitSamples:
    def test_first_value_mean(self):
        # xi_rev[1] = T_1^{1/a} gamma(a+1) / lam with T_1 ~ exp(1)
        a, lam = 1.0, 2.0
        x = limit_sbp_sample(a, lam, 3, np.random.default_rng(0), size=200_000)
        assert x.xi_sbp.shape == (200_000, 3)
        ref = special.gamma(1 + 1 / a) * (a + 1) / lam
        assert abs(x.xi_sbp[:, 0].mean() - ref) < 4 * x.xi_sbp[:, 0].std() / math.sqrt(2e5)
        np.testing.assert_array_equal(x.xi_order, np.sort(x.xi_sbp, axis=1))

    def test_process_and_direct_samples_agree(self):
        rng = np.random.default_rng(6)
        via_proc = np.array([LimitSample.from_process(limit_process(1.5, 1.0, 3, 1e-6, rng)).xi_sbp
                             for _ in range(3000)])
        direct = limit_sbp_sample(1.5, 1.0, 3, rng, size=3000).xi_sbp
        for k in range(3):
            assert stats.ks_2samp(via_proc[:, k], direct[:, k]).pvalue > 1e-4

    def test_j_prefix_batch_matches_single(self):
        rng = np.random.default_rng(8)
        J, b = limit_j_prefix(1.0, 2, 1e-6, 20_000, rng)
        assert J.shape == (20_000, 2) and np.all(b <= 1e-6)
        single = np.array([limit_process(1.0, 1.0, 2, 1e-6, rng).J for _ in range(5000)])
        for col in range(2):
            assert stats.chi2_contingency(np.array([
                np.bincount(np.minimum(J[:, col], 8), minlength=9)[1:],
                np.bincount(np.minimum(single[:, col], 8), minlength=9)[1:]])).pvalue > 1e-4

    def test_limit_j1_and_k1_pmf(self):
        rng = np.random.default_rng(10)
        J, _ = limit_j_prefix(1.0, 1, 1e-6, 50_000, rng)
        p = (J[:, 0] == 1).mean()
        assert abs(p - P_LAST_IS_MIN) < 4 * math.sqrt(0.25 / 5e4)
        k1 = limit_k1(1.0, 1e-6, 50_000, rng)
        p = (k1 == 1).mean()
        assert abs(p - P_LAST_IS_MIN) < 4 * math.sqrt(0.25 / 5e4)
        assert k1.max() <= 21

    def test_k1_law_at_full_budget(self):
        k1 = limit_k1(1.0, 1e-6, 10**6, np.random.default_rng(44))
        probs = np.array([k1_pmf(k) for k in range(1, 21)])
        probs = np.append(probs, 1 - probs.sum())
        obs = np.bincount(k1, minlength=22)[1:]
        assert chi_square_counts(obs, probs).passed

    def test_two_last_picks_sum(self):
        n, reps = 10**4, 10**5
        x = finite_last_picks(GammaModel(1.0, 1.0), n, 2, reps, np.random.default_rng(13))
        xi = limit_sbp_sample(1.0, 1.0, 2, np.random.default_rng(14), size=reps).xi_sbp
        assert ks_two_sample(n * x.sum(1), xi.sum(1)).passed
        assert ks_two_sample(n * x[:, 1], xi[:, 1]).passed

    def test_last_picks_match_keys_sampler(self):
        from sbperm.sampler import batch_by_exponential_keys
        rng = np.random.default_rng(15)
        x = finite_last_picks(GammaModel(2.0, 1.0), 5, 3, 50_000, rng)
        v = rng.gamma(2.0, 1.0, (50_000, 5))
        ref = np.take_along_axis(v, batch_by_exponential_keys(v, rng), axis=1)[:, ::-1]
        for k in range(3):
            assert stats.ks_2samp(x[:, k], ref[:, k]).pvalue > 1e-3

    def test_finite_last_pick(self):
        x, j = finite_last_pick(GammaModel(1.0, 1.0), 2000, 20_000, np.random.default_rng(2))
        assert j.min() >= 1 and j.max() <= 2000
        p = (j == 1).mean()
        assert abs(p - P_LAST_IS_MIN) < 4 * math.sqrt(0.25 / 2e4) + 5e-3
        # n X_rev[1] is close to xi_rev[1] whose mean is 2
        assert abs((2000 * x).mean() - 2.0) < 0.1
