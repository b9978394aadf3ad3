import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfstream import analysis, traffic
from mfstream.errors import DomainError, ParameterError
from mfstream.series import Model

from conftest import N14, seed_mean


def gamma_fgn(k, H):
    # independent transcription of the fGn autocovariance
    return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + abs(k - 1) ** (2 * H))


def sample_autocov(x, lag):
    x = x - x.mean()
    return float(np.dot(x[: len(x) - lag], x[lag:]) / len(x))


class TestFgn:
    def test_white_case_is_iid_standard_normal(self):
        x = traffic.gen_fgn(8, 0.5, 1)
        assert len(x) == 8
        assert x.meta.model is Model.FGN
        big = traffic.gen_fgn(N14, 0.5, 1).values
        assert abs(big.mean()) < 0.05
        assert abs(big.var() - 1) < 0.05
        for lag in (1, 2, 5):
            assert abs(sample_autocov(big, lag)) < 0.04

    @pytest.mark.parametrize("H", [0.6, 0.8])
    def test_autocovariance_matches_closed_form(self, H):
        lags = np.arange(1, 21)
        acov = seed_mean(lambda s: [sample_autocov(traffic.gen_fgn(N14, H, s).values, k) for k in lags])
        expected = np.array([gamma_fgn(k, H) for k in lags])
        assert np.max(np.abs(acov - expected)) <= 0.05

    def test_library_covariance_matches_formula(self):
        k = np.arange(0, 30)
        for H in (0.2, 0.5, 0.8):
            ref = np.array([gamma_fgn(kk, H) for kk in k])
            np.testing.assert_allclose(traffic.fgn_autocovariance(k, H), ref, rtol=1e-13, atol=1e-15)

    def test_mfdfa_recovers_hurst(self):
        h2 = seed_mean(lambda s: analysis.hurst_h2(traffic.gen_fgn(N14, 0.8, s)))
        assert 0.75 <= h2 <= 0.85

    @pytest.mark.parametrize("H", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_bad_hurst(self, H):
        with pytest.raises(ParameterError):
            traffic.gen_fgn(16, H, 0)

    def test_rejects_short(self):
        with pytest.raises(ParameterError):
            traffic.gen_fgn(1, 0.7, 0)

    def test_non_power_of_two_length(self):
        x = traffic.gen_fgn(1000, 0.7, 3)
        assert len(x) == 1000

    def test_negative_eigenvalues_fail_after_bounded_retries(self, monkeypatch):
        monkeypatch.setattr(traffic, "_circulant_eigenvalues", lambda m, h: np.array([1.0, -1.0]))
        with pytest.raises(traffic.EmbeddingError, match="embedding"):
            traffic.gen_fgn(16, 0.7, 0)


class TestFbm:
    def test_is_cumsum_of_fgn(self):
        inc = traffic.gen_fgn(4, 0.7, 9).values
        path = traffic.gen_fbm(4, 0.7, 9).values
        a, b, c, d = inc
        np.testing.assert_array_equal(path, np.cumsum(inc))
        np.testing.assert_allclose(path, [a, a + b, a + b + c, a + b + c + d], rtol=1e-15)

    def test_brownian_increments_are_iid_gaussian(self):
        from scipy import stats

        inc = np.diff(traffic.gen_fbm(N14, 0.5, 2).values)
        assert stats.kstest(inc, "norm").pvalue > 0.01
        assert abs(np.corrcoef(inc[:-1], inc[1:])[0, 1]) < 0.03

    def test_variance_scaling(self):
        # Var[X(2t)] / Var[X(t)] = 2^{2H} across seeds
        H = 0.7
        paths = np.array([traffic.gen_fbm(2**12, H, s).values for s in range(200)])
        for t in (16, 64, 256):
            ratio = paths[:, 2 * t - 1].var() / paths[:, t - 1].var()
            assert abs(ratio / 2 ** (2 * H) - 1) <= 0.15


class TestExpTransform:
    def test_zeros_map_to_ones(self):
        from mfstream import Series

        out = traffic.exp_transform(Series([0.0, 0.0, 0.0]))
        np.testing.assert_array_equal(out.values, [1.0, 1.0, 1.0])

    def test_white_noise_exponent_meta(self):
        y = traffic.exp_transform(traffic.gen_fgn(64, 0.5, 3))
        assert y.meta.model is Model.EXP_FGN and y.meta.hurst == 0.5 and y.meta.seed == 3
        assert y.meta.label == "exp-white"

    def test_lognormal_marginal(self):
        from scipy import stats

        y = traffic.gen_exp_fgn(N14, 0.5, 4).values
        assert stats.kstest(np.log(y), "norm").pvalue > 0.01

    def test_preserves_hurst(self):
        h2 = seed_mean(lambda s: analysis.hurst_h2(traffic.gen_exp_fgn(N14, 0.8, s)))
        assert 0.72 <= h2 <= 0.88

    def test_overflow_names_index(self):
        with pytest.raises(DomainError, match="index 2"):
            traffic.exp_transform(np.array([0.0, 1.0, 800.0, 0.0]))

    @given(st.lists(st.floats(-700, 700), min_size=2, max_size=50))
    def test_positive(self, xs):
        assert traffic.exp_transform(np.array(xs)).values.min() > 0


class TestCascade:
    def test_single_split(self):
        x = traffic.gen_cascade(1, 2.0, 5).values
        w = np.random.Generator(np.random.PCG64(5)).beta(2.0, 2.0)
        np.testing.assert_allclose(x, [2 * w, 2 * (1 - w)], rtol=1e-15)
        assert x.sum() == pytest.approx(2.0, rel=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 14), st.floats(0.05, 50), st.integers(0, 2**64 - 1))
    def test_conservation_and_positivity(self, depth, alpha, seed):
        x = traffic.gen_cascade(depth, alpha, seed).values
        assert len(x) == 2**depth
        assert abs(x.mean() - 1) <= 1e-10
        assert x.min() >= 0
        if alpha >= 1:
            assert x.min() > 0

    def test_moment_h1_is_one(self):
        h1 = analysis.moment_spectrum(traffic.gen_cascade(14, 1.0, 0), [1.0]).at(1.0)
        assert abs(h1 - 1.0) <= 0.05

    def test_moment_h2_matches_beta_oracle(self):
        h2 = seed_mean(lambda s: analysis.moment_spectrum(traffic.gen_cascade(14, 1.0, s), [2.0]).at(2.0))
        assert abs(h2 - (-math.log2(1 / 3) / 2)) <= 0.1

    @pytest.mark.parametrize("depth,alpha", [(0, 1.0), (3, 0.0), (3, -1.0)])
    def test_rejects_bad_parameters(self, depth, alpha):
        with pytest.raises(ParameterError):
            traffic.gen_cascade(depth, alpha, 0)


class TestCascadeOracle:
    @pytest.mark.parametrize("alpha,q", [(0.5, 2.0), (1.0, 2.0), (1.0, 3.5), (3.0, 0.5), (2.0, -1.0)])
    def test_beta_moment_against_monte_carlo(self, alpha, q):
        w = np.random.default_rng(123).beta(alpha, alpha, size=2_000_000)
        mc = np.mean(w**q)
        stderr = np.std(w**q) / math.sqrt(w.size)
        assert abs(traffic.beta_moment(q, alpha) - mc) <= 5 * stderr

    def test_beta_moment_lgamma_and_product_agree(self):
        for alpha in (0.3, 1.0, 7.0):
            for q in (1, 2, 3, 5):
                via_gamma = math.exp(
                    math.lgamma(2 * alpha) + math.lgamma(alpha + q) - math.lgamma(alpha) - math.lgamma(2 * alpha + q)
                )
                assert traffic.beta_moment(q, alpha) == pytest.approx(via_gamma, rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.2, 1.0, 5.0, 100.0])
    def test_h1_exact(self, alpha):
        assert traffic.cascade_theoretical_h(1.0, alpha) == 1.0

    def test_h2_alpha_one(self):
        # E[W^2] = (a+1) / (2(2a+1)) = 1/3
        assert traffic.cascade_theoretical_h(2.0, 1.0) == pytest.approx(math.log2(3) / 2, abs=1e-12)
        assert traffic.cascade_theoretical_h(2.0, 1.0) == pytest.approx(0.7925, abs=1e-4)

    def test_strictly_decreasing(self):
        qs = np.linspace(-0.9, 10, 60)
        h = [traffic.cascade_theoretical_h(q, 1.0) for q in qs if q != 0]
        assert all(b < a for a, b in zip(h, h[1:]))

    def test_large_alpha_limit(self):
        for q in (0.5, 2.0, 5.0, 10.0):
            assert abs(traffic.cascade_theoretical_h(q, 1e4) - 1.0) < 1e-3

    def test_q_zero_is_continuous_limit(self):
        h0 = traffic.cascade_theoretical_h(0.0, 1.0)
        assert h0 == pytest.approx(traffic.cascade_theoretical_h(1e-3, 1.0), abs=1e-3)
        assert h0 == pytest.approx(traffic.cascade_theoretical_h(-1e-3, 1.0), abs=1e-3)

    def test_domain(self):
        with pytest.raises(DomainError):
            traffic.cascade_theoretical_h(-1.0, 1.0)
        with pytest.raises(DomainError):
            traffic.cascade_theoretical_h(2.0, 0.0)


class TestAr1:
    def test_phi_zero_is_white(self):
        x = traffic.gen_ar1(N14, 0.0, 1.0, 3).values
        z = np.random.Generator(np.random.PCG64(3)).standard_normal(N14)
        np.testing.assert_allclose(x, z, rtol=0, atol=0)

    def test_lag1_autocorrelation(self):
        r1 = seed_mean(lambda s: np.corrcoef(*(lambda v: (v[:-1], v[1:]))(traffic.gen_ar1(N14, 0.7, 1.0, s).values))[0, 1])
        assert abs(r1 - 0.7) <= 0.03

    def test_stationary_variance(self):
        var = seed_mean(lambda s: traffic.gen_ar1(N14, 0.7, 2.0, s).values.var(ddof=1))
        assert abs(var / (4.0 / (1 - 0.49)) - 1) <= 0.10

    def test_recursion(self):
        x = traffic.gen_ar1(50, -0.4, 0.5, 8).values
        z = np.random.Generator(np.random.PCG64(8)).standard_normal(50)
        assert x[0] == pytest.approx(z[0] * 0.5 / math.sqrt(1 - 0.16), rel=1e-15)
        np.testing.assert_allclose(x[1:], -0.4 * x[:-1] + 0.5 * z[1:], rtol=1e-13, atol=1e-15)

    def test_short_memory_is_flat(self):
        qs = analysis.QGrid.arange(1, 5, 0.5)
        h = seed_mean(lambda s: analysis.mfdfa(traffic.gen_ar1(N14, 0.7, 1.0, s), qs).h)
        assert np.ptp(h) <= 0.1

    @pytest.mark.parametrize("phi", [1.0, -1.0, 1.5])
    def test_nonstationary_rejected(self, phi):
        with pytest.raises(ParameterError):
            traffic.gen_ar1(10, phi, 1.0, 0)


class TestIid:
    def test_uniform_moments(self):
        x = traffic.gen_iid(N14, "UNIFORM", 0, low=0.0, high=1.0).values
        assert abs(x.mean() - 0.5) <= 0.02
        assert abs(x.var(ddof=1) - 1 / 12) <= 0.005

    def test_normal_matches_white_fgn_in_distribution(self):
        from scipy import stats

        a = traffic.gen_iid(N14, "NORMAL", 1, mu=0.0, sigma=1.0).values
        b = traffic.gen_fgn(N14, 0.5, 2).values
        assert stats.ks_2samp(a, b).pvalue > 0.01

    def test_lognormal(self):
        x = traffic.gen_iid(N14, "LOGNORMAL", 1, mu=0.0, sigma=0.5).values
        assert x.min() > 0
        assert abs(np.log(x).std() - 0.5) < 0.02

    def test_uniform_h2(self):
        h2 = seed_mean(lambda s: analysis.hurst_h2(traffic.gen_iid(N14, "UNIFORM", s, low=0.0, high=1.0)))
        assert 0.45 <= h2 <= 0.55

    def test_bad_parameters(self):
        with pytest.raises(ParameterError):
            traffic.gen_iid(10, "UNIFORM", 0, low=1.0, high=1.0)
        with pytest.raises(ParameterError):
            traffic.gen_iid(10, "NORMAL", 0, mu=0.0, sigma=-1.0)
        with pytest.raises(ParameterError):
            traffic.gen_iid(10, "UNIFORM", 0, low=0.0)


@pytest.mark.parametrize(
    "make",
    [
        lambda s: traffic.gen_fgn(1000, 0.7, s),
        lambda s: traffic.gen_fbm(1000, 0.3, s),
        lambda s: traffic.gen_exp_fgn(1000, 0.8, s),
        lambda s: traffic.gen_cascade(10, 0.7, s),
        lambda s: traffic.gen_ar1(1000, 0.5, 1.0, s),
        lambda s: traffic.gen_iid(1000, "LOGNORMAL", s, mu=0.0, sigma=1.0),
    ],
)
def test_determinism(make):
    a, b, c = make(11), make(11), make(12)
    assert a == b
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, c.values)
    assert traffic.generate(a.meta) == a
