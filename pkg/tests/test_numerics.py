import math

import numpy as np
import pytest
from scipy import stats

from wcpbatch.numerics import (
    ExpFloat,
    ParameterError,
    Probability,
    RngStream,
    binomial_sample,
    lambert_w_minus1,
    poisson_counts,
    poisson_pmf,
    poisson_sample,
    wilson_interval,
)


def bisect_lambert(x: float, lo: float = -50.0, hi: float = -1.0) -> float:
    """Independent oracle: solve w*e^w = x on [lo, -1] where w*e^w is monotone."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) > x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestPoissonPmf:
    def test_exact_values(self):
        assert poisson_pmf(0, 0.0) == 1.0
        assert poisson_pmf(3, 0.0) == 0.0
        assert poisson_pmf(0, 0.1) == pytest.approx(math.exp(-0.1), rel=1e-14)
        assert poisson_pmf(2, 0.2) == pytest.approx(0.2**2 * math.exp(-0.2) / 2, rel=1e-14)

    @pytest.mark.parametrize("mean", [0.05, 0.5, 2.0, 10.0])
    def test_normalisation_after_truncation(self, mean):
        total, n = 0.0, 0
        while 1.0 - total >= 1e-15:
            total += poisson_pmf(n, mean)
            n += 1
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ParameterError):
            poisson_pmf(0, -0.1)
        with pytest.raises(ParameterError):
            poisson_pmf(-1, 0.1)
        with pytest.raises(ParameterError):
            poisson_pmf(0, math.inf)


class TestPoissonSampling:
    def test_zero_mean_is_deterministic(self):
        assert all(poisson_sample(0.0, RngStream(0, i)) == 0 for i in range(20))

    def test_law_of_large_numbers(self):
        draws = poisson_counts(0.1, 1_000_000, RngStream(101))
        assert abs(draws.mean() - 0.1) < 0.001  # 3 sigma of the normal approximation

    def test_two_photon_frequency(self):
        draws = poisson_counts(0.2, 1_000_000, RngStream(102))
        p2 = poisson_pmf(2, 0.2)
        sigma = math.sqrt(p2 * (1 - p2) / 1_000_000)
        assert abs(np.mean(draws == 2) - p2) < 3 * sigma

    @pytest.mark.parametrize("mean", [0.05, 0.5, 2.0])
    def test_chi_square_goodness_of_fit(self, mean):
        draws = poisson_counts(mean, 1_000_000, RngStream(103))
        observed = np.bincount(draws)
        expected = np.array([poisson_pmf(n, mean) for n in range(len(observed))]) * 1e6
        # pool the tail so every cell has expected count >= 5
        while expected[-1] < 5:
            expected[-2] += expected[-1]
            observed[-2] += observed[-1]
            expected, observed = expected[:-1], observed[:-1]
        expected[-1] += 1e6 - expected.sum()  # residual tail mass
        chi2 = float(((observed - expected) ** 2 / expected).sum())
        assert chi2 < stats.chi2.ppf(0.999, df=len(expected) - 1)

    def test_large_mean_path(self):
        draws = poisson_counts(50.0, 20_000, RngStream(104))
        assert abs(draws.mean() - 50.0) < 3 * math.sqrt(50.0 / 20_000)


class TestBinomialSampling:
    def test_degenerate_probabilities(self):
        assert binomial_sample(100, 0.0, RngStream(0)) == 0
        assert binomial_sample(100, 1.0, RngStream(0)) == 100

    def test_mean_matches_delivery_probability(self):
        # delivery probability 1 - e^{-0.1} for nu' = 0.2 through eta = 0.5
        p = 1.0 - math.exp(-0.1)
        rng = RngStream(105)
        draws = [binomial_sample(1_000_000, p, rng.child(i)) for i in range(2000)]
        sigma_mean = math.sqrt(1e6 * p * (1 - p) / 2000)
        assert abs(np.mean(draws) - 1e6 * p) < 3 * sigma_mean

    def test_rejects_bad_parameters(self):
        with pytest.raises(ParameterError):
            binomial_sample(-1, 0.5, RngStream(0))
        with pytest.raises(ParameterError):
            binomial_sample(10, 1.5, RngStream(0))


class TestLambertWMinus1:
    def test_branch_point(self):
        assert lambert_w_minus1(-1.0 / math.e) == pytest.approx(-1.0, abs=1e-8)

    def test_against_bisection_oracle(self):
        # frozen from the oracle: bisect_lambert(-0.2) = -2.542641357773526
        assert lambert_w_minus1(-0.2) == pytest.approx(-2.542641357773526, abs=1e-10)
        assert lambert_w_minus1(-0.2) == pytest.approx(bisect_lambert(-0.2), abs=1e-9)
        # the argument arising from eta0 = 0.2 in the closed-form intensity bound
        x = (0.2 - 1.0) * math.exp(0.2 - 1.0)
        w = lambert_w_minus1(x)
        assert abs(w * math.exp(w) - x) <= 1e-12
        assert w == pytest.approx(bisect_lambert(x), abs=1e-9)

    def test_round_trip_residuals(self):
        u = RngStream(106).uniform(1000)
        xs = -1e-6 - u * (1.0 / math.e - 2e-6)  # interior of (-1/e, 0)
        for x in xs:
            w = lambert_w_minus1(float(x))
            assert w <= -1.0
            assert abs(w * math.exp(w) - x) <= 1e-12

    def test_extreme_arguments(self):
        w = lambert_w_minus1(-1e-300)
        assert abs(w * math.exp(w) + 1e-300) <= 1e-312
        near_branch = -1.0 / math.e + 1e-14
        assert lambert_w_minus1(near_branch) == pytest.approx(-1.0, abs=1e-5)

    @pytest.mark.parametrize("x", [0.0, 0.5, -0.5, -1.0, math.nan])
    def test_domain_errors(self, x):
        with pytest.raises(ParameterError):
            lambert_w_minus1(x)


class TestRngStream:
    def test_same_address_same_sequence(self):
        a = RngStream(42, 7).uniform(100)
        b = RngStream(42, 7).uniform(100)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(42, 7).uniform(100)
        b = RngStream(42, 8).uniform(100)
        c = RngStream(43, 7).uniform(100)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_children_are_reproducible_and_distinct(self):
        parent = RngStream(1, 2)
        assert np.array_equal(parent.child(3).uniform(10), RngStream(1, 2).child(3).uniform(10))
        assert not np.array_equal(parent.child(3).uniform(10), parent.child(4).uniform(10))

    def test_draws_do_not_disturb_children(self):
        s = RngStream(5)
        first = s.child(0).uniform(5)
        s.uniform(1000)
        assert np.array_equal(first, s.child(0).uniform(5))

    def test_subset_is_uniform_without_replacement(self):
        picked = RngStream(9).subset(np.arange(10), 4)
        assert len(set(picked.tolist())) == 4

    def test_rejects_out_of_range_seed(self):
        with pytest.raises(ParameterError):
            RngStream(-1)
        with pytest.raises(ParameterError):
            RngStream(2**64)


class TestProbability:
    @pytest.mark.parametrize("value", [-0.1, 1.1, math.nan])
    def test_rejects_outside_unit_interval(self, value):
        with pytest.raises(ParameterError):
            Probability(value)

    def test_behaves_like_float(self):
        assert Probability(0.25) * 4 == 1.0


class TestExpFloat:
    def test_addition_matches_logaddexp(self):
        a, b = ExpFloat(-3.0), ExpFloat(-4.5)
        assert (a + b).log_value == pytest.approx(np.logaddexp(-3.0, -4.5), rel=1e-15)
        assert (a + b).value == pytest.approx(math.exp(-3.0) + math.exp(-4.5), rel=1e-12)

    def test_multiplication_by_scalar(self):
        assert (32 * ExpFloat(-10.0)).log_value == pytest.approx(-10.0 + math.log(32), rel=1e-15)

    def test_survives_underflow(self):
        tiny = ExpFloat(-1e9)
        assert tiny.value == 0.0
        doubled = tiny + tiny
        assert doubled.log_value == pytest.approx(-1e9 + math.log(2), rel=1e-9)

    def test_ordering(self):
        assert ExpFloat(-5.0) < ExpFloat(-4.0)
        assert ExpFloat.from_value(0.0).log_value == -math.inf


class TestWilson:
    def test_contains_point_estimate(self):
        low, high = wilson_interval(50, 1000, z=3.0)
        assert low < 0.05 < high

    def test_zero_hits(self):
        low, high = wilson_interval(0, 100)
        assert low == 0.0 and high > 0.0

    def test_rejects_bad_counts(self):
        with pytest.raises(ParameterError):
            wilson_interval(5, 0)
        with pytest.raises(ParameterError):
            wilson_interval(11, 10)
