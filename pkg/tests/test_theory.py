import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from core.errors import ParameterError
from core.sampling import SeedSpec
from core.theory import (BoundReport, TheoremConstants, balls_in_bins_check, balls_in_bins_exact, chernoff_upper,
                         fcn_gap_bound, order_stat_first_moment, order_stat_moment, order_stat_moment_lgamma,
                         order_stat_monte_carlo, order_stat_second_moment, thm1_c2, thm1_probability,
                         thm1_width_bound, thm1_width_terms, thm2_alpha_constraints, thm2_c2, thm2_probability,
                         thm2_width_bound, thm3_alpha_constraint, thm3_constants, thm3_probability, thm3_rhs)


def _brute_max_load(n, N, threshold):
    good = sum(max(np.bincount(a, minlength=n)) <= threshold for a in itertools.product(range(n), repeat=N))
    return Fraction(int(good), n ** N)


class TestOrderStatistics:

    @pytest.mark.parametrize("a, n, r, p, expected", [
        (1, 1, 1, 1, Fraction(1, 3)),
        (1, 1, 1, 2, Fraction(1, 5)),
        (1, 100, 10, 1, Fraction(110, 10302)),
        (Fraction(1, 2), 3, 3, 1, Fraction(1, 4) * Fraction(12, 20)),
    ])
    def test_exact_values(self, a, n, r, p, expected):
        assert order_stat_moment(a, n, r, p) == expected

    def test_closed_forms(self):
        for n, r in [(5, 1), (5, 5), (40, 17)]:
            assert order_stat_moment(1, n, r, 1) == order_stat_first_moment(1, n, r)
            assert order_stat_moment(1, n, r, 2) == order_stat_second_moment(1, n, r)

    @pytest.mark.parametrize("n", [1, 2, 7, 50])
    def test_sum_over_ranks(self, n):
        assert sum(order_stat_moment(1, n, r, 1) for r in range(1, n + 1)) == Fraction(n, 3)

    def test_largest_of_n(self):
        assert order_stat_moment(1, 20, 20, 1) == Fraction(20, 22)

    @pytest.mark.parametrize("a, n, r, p", [(0.5, 100, 10, 1), (2.0, 4096, 64, 2), (0.125, 1000, 1000, 3)])
    def test_lgamma_agrees(self, a, n, r, p):
        assert order_stat_moment_lgamma(a, n, r, p) == pytest.approx(order_stat_moment(a, n, r, p), rel=1e-9)

    def test_float_a(self):
        assert isinstance(order_stat_moment(0.5, 10, 2, 1), float)

    def test_monte_carlo(self):
        trials = 20000
        mean, se = order_stat_monte_carlo(1, 100, 10, 1, trials, SeedSpec(1))
        assert abs(mean - 110 / 10302) <= 4 * se
        assert se == pytest.approx(math.sqrt(float(order_stat_second_moment(1, 100, 10))
                                             - (110 / 10302) ** 2) / math.sqrt(trials), rel=0.1)

    @pytest.mark.parametrize("a, n, r, p", [(0, 5, 1, 1), (1, 5, 0, 1), (1, 5, 6, 1), (1, 5, 1, 0)])
    def test_bad_arguments(self, a, n, r, p):
        with pytest.raises(ParameterError):
            order_stat_moment(a, n, r, p)


class TestChernoff:

    def test_log_n_mean(self):
        for n in (10, 1000):
            assert chernoff_upper(math.log(n), 2.0) == pytest.approx(n ** (-4.0 / 3.0))

    def test_values(self):
        assert chernoff_upper(3.0, 1.0) == pytest.approx(0.2231, abs=1e-4)
        assert chernoff_upper(5.0, 1e-9) == pytest.approx(1.0)

    def test_positive_arguments(self):
        with pytest.raises(ParameterError):
            chernoff_upper(0.0, 1.0)
        with pytest.raises(ParameterError):
            chernoff_upper(1.0, -1.0)


class TestBallsInBins:

    def test_exact_four_bins(self):
        assert balls_in_bins_exact(4, 8, 6) == 1 - Fraction(100, 65536)

    @pytest.mark.parametrize("n, N", [(3, 7), (4, 6), (5, 5), (6, 4)])
    def test_exact_matches_enumeration(self, n, N):
        threshold = 3.0 * N / n
        assert balls_in_bins_exact(n, N, threshold) == _brute_max_load(n, N, threshold)

    def test_exact_edges(self):
        assert balls_in_bins_exact(3, 0, 0) == 1
        assert balls_in_bins_exact(2, 3, 1) == 0
        assert balls_in_bins_exact(1, 4, 12) == 1

    def test_single_bin(self):
        report = balls_in_bins_check(1, 5, 10, SeedSpec(1))
        assert report.probability == 1.0
        assert report.satisfied

    def test_monte_carlo_matches_exact(self):
        trials = 10000
        report = balls_in_bins_check(4, 8, trials, SeedSpec(2))
        exact = float(report.exact)
        assert exact == pytest.approx(1 - 100 / 65536)
        se = math.sqrt(exact * (1 - exact) / trials)
        assert abs(report.probability - exact) <= 4 * se

    @pytest.mark.parametrize("n", [32, 64])
    def test_guarantee_branch(self, n):
        N = math.ceil(n * math.log(n))
        report = balls_in_bins_check(n, N, 2000, SeedSpec(3, n))
        assert report.guarantee
        assert report.probability >= 1 - n ** (-1 / 3)
        assert report.satisfied

    def test_no_guarantee_below_n_log_n(self):
        report = balls_in_bins_check(64, 100, 200, SeedSpec(4))
        assert not report.guarantee
        assert report.satisfied is None


class TestMagnitudeFcn:

    def _consts(self):
        return TheoremConstants(c0=1.0, c2=1.0, delta0=1.0)

    def test_worked_width(self):
        assert thm1_width_bound(self._consts(), 3, 1.0, 0.5, 0.1, 0.1) == 4900

    def test_monotone_in_eps(self):
        bounds = [thm1_width_bound(self._consts(), 4, 1.0, 0.5, eps, 0.1) for eps in (1.0, 0.3, 0.1, 0.03)]
        assert bounds == sorted(bounds)

    def test_delta_near_one_leaves_eps_term(self):
        terms = thm1_width_terms(self._consts(), 3, 1.0, 0.5, 0.001, 1 - 1e-6)
        assert max(terms, key=terms.get) == 'eps'

    def test_missing_constants(self):
        with pytest.raises(ParameterError):
            thm1_width_bound(TheoremConstants(c0=1.0), 3, 1.0, 0.5, 0.1, 0.1)

    def test_probability(self):
        report = thm1_probability(3, 10 ** 4, 0.5, 1.0, 0.01)
        assert report.value == pytest.approx(0.99, rel=1e-12)
        assert not report.vacuous
        assert thm1_probability(3, 10 ** 4, 0.5, 1000.0, 0.01).vacuous

    def test_c2(self):
        assert thm1_c2(1.0, 1.0) == pytest.approx(2 * math.sqrt(2) + 24 ** 0.25)


class TestRandomFcn:

    def test_homogeneous_constraint(self):
        c = thm2_alpha_constraints([1024, 1024])
        assert c.max_alpha == pytest.approx(0.63959, abs=1e-5)
        assert len(c.reports) == 2
        assert c.reports[0].rhs == c.reports[1].rhs

    def test_constraint_at_64(self):
        assert thm2_alpha_constraints([64, 64, 64]).max_alpha == pytest.approx(0.6695, abs=1e-4)

    def test_constraint_increasing_in_width(self):
        values = [thm2_alpha_constraints([d, d]).max_alpha for d in np.geomspace(8, 2 ** 20, 40).astype(int)]
        assert all(np.diff(values) > 0)

    def test_given_alpha(self):
        assert all(r.satisfied for r in thm2_alpha_constraints([1024, 1024], 0.6).reports)
        assert not any(r.satisfied for r in thm2_alpha_constraints([1024, 1024], 0.7).reports)

    def test_narrow_width(self):
        with pytest.raises(ParameterError):
            thm2_alpha_constraints([2, 8])

    def test_probability_example(self):
        report = thm2_probability(3, 10 ** 6, 0.6, 1.0, (0, 0, 0))
        assert report.value == pytest.approx(0.8569, abs=5e-4)
        assert report.value == pytest.approx(0.99 ** 2 * (1 - 10 ** -0.9), rel=1e-12)

    def test_probability_limits(self):
        assert thm2_probability(3, 10 ** 60, 0.6, 1.0, (0, 0, 0)).value == pytest.approx(1.0, abs=1e-6)
        assert thm2_probability(3, 10 ** 6, 0.6, 1.0, (0, 0, 1)).value == 0.0

    def test_probability_increasing_in_d(self):
        values = [thm2_probability(4, d, 0.6, 1.0, (0.001,) * 4).value for d in (10 ** 4, 10 ** 5, 10 ** 6, 10 ** 8)]
        assert values == sorted(values)

    def test_width_bound(self):
        consts = TheoremConstants(c2=1.0, N=(1.0, 1.0, 1.0), deltas=(0.0, 0.0, 0.0))
        # mask term 6^3, weight term 6^8, eps term eps^-8
        bounds = [thm2_width_bound(consts, 3, 1.0, 0.5, eps, 0.5) for eps in (1.0, 0.5, 0.1)]
        assert bounds == [6 ** 8, 6 ** 8, 10 ** 8]

    def test_failure_budget_exhausted(self):
        consts = TheoremConstants(c2=1.0, N=(1.0, 1.0, 1.0), deltas=(0.05, 0.05, 0.05))
        with pytest.raises(ParameterError):
            thm2_width_bound(consts, 3, 1.0, 0.5, 0.1, 0.1)

    def test_norm_bounds_at_least_one(self):
        with pytest.raises(ParameterError):
            TheoremConstants(N=(0.5, 1.0, 1.0))

    def test_c2(self):
        assert thm2_c2(1.0, 3.0, 16.0) == pytest.approx(2 * 3 + 2)

    def test_gap_bound_rates(self):
        assert fcn_gap_bound(3, 1.0, [1, 1, 1], 100, 0.5, 'magnitude-layerwise') == pytest.approx(0.1)
        assert fcn_gap_bound(3, 1.0, [1, 1, 1], 100, 0.5, 'random-with-replacement') == pytest.approx(100 ** -0.125)


class TestFilterCnn:

    @pytest.mark.parametrize("d, expected", [(128, 0.6729), (1024, 0.7205), (16, 0.6104), (32, 0.6325)])
    def test_alpha_constraint(self, d, expected):
        assert thm3_alpha_constraint(d) == pytest.approx(expected, abs=1e-4)

    def test_alpha_constraint_tends_to_one(self):
        assert thm3_alpha_constraint(2 ** 30) > 0.9
        with pytest.raises(ParameterError):
            thm3_alpha_constraint(2)

    def test_rhs_example(self):
        assert thm3_rhs(32, 64, 1.0, 1.0, 3, 0.5, 0.1) == pytest.approx(0.16497, rel=1e-3)

    def test_rhs_vanishes_for_large_beta2(self):
        assert abs(thm3_rhs(32, 64, 1.0, 1.0, 3, 0.5, 50.0)) < 1e-12

    def test_rhs_parameter_ranges(self):
        with pytest.raises(ParameterError):
            thm3_rhs(32, 64, 1.0, 1.0, 3, 1.0, 0.1)
        with pytest.raises(ParameterError):
            thm3_rhs(32, 64, 1.0, 1.0, 2, 0.5, 0.1)

    def test_probability_without_constants(self):
        report = thm3_probability(3, 256, 32, 3, 0.6, 0.1, 0.05, 0.0, 0.0, 0.0)
        assert report.value == pytest.approx((1 - 256 ** (-1 / 3)) ** 2)
        assert report.p_bar == 1.0

    def test_probability_independent_evaluation(self):
        l, d, p, q, alpha, b1, b2, c = 3, 256, 32, 3, 0.6, 0.1, 0.05, 0.6
        weights = 1 - (l - 2) * c * q * q / p * d ** (b2 - alpha / 4) \
            - (l * l - l - 2) / 2 * c * q * q * p ** (b1 - 1) - c * p ** (b1 - 1)
        masks = math.pow(1 - math.pow(d, -1 / 3), 2 * (l - 2))
        report = thm3_probability(l, d, p, q, alpha, b1, b2, c, c, c)
        assert report.value == pytest.approx(masks * weights, rel=1e-12)
        assert report.vacuous == (weights <= 0)

    def test_vacuous_flag(self):
        assert thm3_probability(3, 256, 32, 3, 0.6, 0.1, 0.05, 10.0, 10.0, 10.0).vacuous

    def test_beta2_range(self):
        with pytest.raises(ParameterError):
            thm3_probability(3, 256, 32, 3, 0.6, 0.1, 0.15, 0.0, 0.0, 0.0)

    def test_constants(self):
        C3, C4 = thm3_constants(1.0, 1.0, 1.0)
        assert C3 == pytest.approx(3.0)
        assert C4 == pytest.approx(2 * math.sqrt(3) + 1)


class TestBoundReport:

    def test_directions(self):
        assert BoundReport.check('le', 1.0, 2.0).satisfied
        assert not BoundReport.check('ge', 1.0, 2.0, '>=').satisfied
        assert BoundReport.check('ge', 2.0, 2.0, '>=').satisfied
