import math
from collections import Counter

import numpy as np
import pytest

from catchtl.metrics import (
    AbundanceSeries,
    CredibleInterval,
    empirical_coverage,
    interval,
    mad_from_truth,
    mann_kendall_u,
    mk_posterior,
)
from catchtl.rng import RngStream


def mk_u_oracle(values) -> float:
    """Independent pairwise-enumeration Mann-Kendall implementation."""
    values = [float(v) for v in values]
    n = len(values)
    s = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            diff = values[j] - values[i]
            s += (diff > 0) - (diff < 0)
    ties = Counter(values)
    tie_term = sum(t * (t - 1) * (2 * t + 5) for t in ties.values())
    var_num = n * (n - 1) * (2 * n + 5) - tie_term
    var = var_num / 18.0
    if var == 0.0:
        return 0.0
    return s / math.sqrt(var)


class TestMannKendall:
    def test_monotone_series(self):
        # S = 6, V = 156/18, U = 6 / sqrt(26/3)
        u = mann_kendall_u([1.0, 2.0, 3.0, 4.0])
        assert u == pytest.approx(2.0381, abs=1e-4)
        assert u == 6.0 / np.sqrt(156.0 / 18.0)

    def test_all_ties_zero_variance(self):
        assert mann_kendall_u([5.0, 5.0, 5.0]) == 0.0

    def test_three_point_mixed(self):
        u = mann_kendall_u([3.0, 1.0, 2.0])
        assert u == pytest.approx(-0.5222, abs=1e-4)
        assert u == -1.0 / np.sqrt(66.0 / 18.0)

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            mann_kendall_u([1.0, 2.0])

    def test_matches_oracle_exactly(self):
        gen = RngStream(31).generator()
        for _ in range(300):
            n = int(gen.integers(3, 31))
            if gen.random() < 0.5:
                values = gen.integers(0, 6, size=n).astype(float)  # heavy ties
            else:
                values = gen.normal(size=n)
            assert mann_kendall_u(values) == mk_u_oracle(values)

    def test_antisymmetric_under_reversal(self):
        gen = RngStream(32).generator()
        for _ in range(50):
            values = gen.normal(size=int(gen.integers(3, 20)))
            assert mann_kendall_u(values[::-1]) == pytest.approx(
                -mann_kendall_u(values), abs=1e-12
            )

    def test_invariant_under_increasing_transforms(self):
        gen = RngStream(33).generator()
        for _ in range(50):
            values = gen.normal(size=10)
            u = mann_kendall_u(values)
            assert mann_kendall_u(np.exp(values)) == u
            assert mann_kendall_u(3.0 * values + 7.0) == u

    def test_accepts_abundance_series(self):
        series = AbundanceSeries([3, 1, 2], [2.0, 1.0, 3.0])
        # sorted by year -> values (1, 3, 2)
        assert mann_kendall_u(series) == mann_kendall_u([1.0, 3.0, 2.0])


class TestMkPosterior:
    def test_constant_draws_collapse(self):
        draws = np.tile([1.0, 2.0, 3.0, 5.0], (8, 1))
        out = mk_posterior(draws)
        assert np.all(out == mann_kendall_u([1.0, 2.0, 3.0, 5.0]))

    def test_matches_per_draw_oracle(self):
        gen = RngStream(34).generator()
        draws = gen.normal(size=(40, 9))
        draws[::4] = np.round(draws[::4])  # some rows with ties
        out = mk_posterior(draws)
        for row, u in zip(draws, out):
            assert u == mk_u_oracle(row)

    def test_output_length(self):
        draws = RngStream(35).generator().normal(size=(17, 5))
        assert mk_posterior(draws).shape == (17,)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mk_posterior(np.empty((0, 5)))


class TestMad:
    def test_identical_series(self):
        s = AbundanceSeries([1, 2, 3], [10.0, 11.0, 12.0])
        assert mad_from_truth(s, s) == 0.0

    def test_hand_computed(self):
        means = AbundanceSeries([1, 2, 3], [12.0, 10.0, 7.0])
        truth = AbundanceSeries([1, 2, 3], [10.0, 10.0, 10.0])
        assert mad_from_truth(means, truth) == 2.0

    def test_year_permutation_invariance(self):
        means = AbundanceSeries([3, 1, 2], [7.0, 12.0, 10.0])
        truth = AbundanceSeries([2, 3, 1], [10.0, 10.0, 10.0])
        ordered_means = AbundanceSeries([1, 2, 3], [12.0, 10.0, 7.0])
        ordered_truth = AbundanceSeries([1, 2, 3], [10.0, 10.0, 10.0])
        assert mad_from_truth(means, truth) == mad_from_truth(ordered_means, ordered_truth)

    def test_misaligned_years_rejected(self):
        a = AbundanceSeries([1, 2, 3], [1.0, 1.0, 1.0])
        b = AbundanceSeries([1, 2, 4], [1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            mad_from_truth(a, b)


class TestInterval:
    def test_interpolated_quantiles(self):
        ci = interval(np.arange(1.0, 101.0), 0.95)
        assert ci.lo == pytest.approx(3.475, abs=1e-9)
        assert ci.hi == pytest.approx(97.525, abs=1e-9)

    def test_constant_draws(self):
        ci = interval(np.full(10, 4.2), 0.9)
        assert (ci.lo, ci.hi) == (4.2, 4.2)

    def test_half_level(self):
        ci = interval(np.arange(1.0, 6.0), 0.5)
        assert (ci.lo, ci.hi) == (2.0, 4.0)

    def test_widens_with_level(self):
        draws = RngStream(36).generator().normal(size=500)
        prev = interval(draws, 0.5)
        for level in (0.6, 0.8, 0.9, 0.95, 0.99):
            cur = interval(draws, level)
            assert cur.lo <= prev.lo and cur.hi >= prev.hi
            prev = cur

    def test_small_inputs_rejected(self):
        with pytest.raises(ValueError):
            interval(np.array([1.0]), 0.95)
        with pytest.raises(ValueError):
            interval(np.array([]), 0.95)


class TestCoverage:
    def test_all_inside(self):
        cis = [CredibleInterval(0.95, 0.0, 2.0)] * 4
        assert empirical_coverage(cis, [1.0, 0.0, 2.0, 0.5]) == 1.0

    def test_none_inside(self):
        cis = [CredibleInterval(0.95, 0.0, 2.0)] * 3
        assert empirical_coverage(cis, [-1.0, 3.0, 5.0]) == 0.0

    def test_counting(self):
        cis = [CredibleInterval(0.95, 0.0, 2.0)] * 4
        assert empirical_coverage(cis, [1.0, 1.5, 9.0, 0.2]) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            empirical_coverage([CredibleInterval(0.9, 0.0, 1.0)], [0.5, 0.7])


class TestSeriesValidation:
    def test_duplicate_years_rejected(self):
        with pytest.raises(ValueError):
            AbundanceSeries([1, 1, 2], [1.0, 2.0, 3.0])

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            AbundanceSeries([1, 2], [1.0, 0.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            AbundanceSeries([1, 2, 3], [1.0, 2.0])

    def test_interval_validation(self):
        with pytest.raises(ValueError):
            CredibleInterval(1.5, 0.0, 1.0)
        with pytest.raises(ValueError):
            CredibleInterval(0.9, 2.0, 1.0)
