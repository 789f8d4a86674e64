import math

import numpy as np
from django.test import SimpleTestCase

from whitespace.exceptions import DegenerateSeries, TooFewSamples
from whitespace.rng import make_rng
from whitespace.stats import (FitBranch, TrafficStats, basic_stats, classify_branch, compute_traffic_stats,
                              generate_fgn, hurst_boxed_periodogram, hurst_median, hurst_peng, hurst_periodogram,
                              is_self_similar)
from whitespace.trace_io import IatSeries


def exponential_series(seed, n=10000):
    return make_rng(seed).exponential(10.0, n)


def stats(c, h, m1=10.0):
    return TrafficStats(m1_ms=m1, sigma_ms=c * m1, c=c, h=h, n_samples=10000)


class BasicStatsTests(SimpleTestCase):

    def test_constant_series(self):
        self.assertEqual(basic_stats(IatSeries.from_ms([10.0] * 50)), (10.0, 0.0, 0.0))

    def test_two_points(self):
        m1, sigma, c = basic_stats(IatSeries.from_ms([10.0, 30.0]))
        self.assertAlmostEqual(m1, 20.0)
        self.assertAlmostEqual(sigma, 10.0)
        self.assertAlmostEqual(c, 0.5)

    def test_scale_equivariance(self):
        iats = IatSeries(np.rint(exponential_series(3, n=2000) * 1000.0).astype(np.int64) + 1)
        m1, sigma, c = basic_stats(iats)
        scaled_m1, scaled_sigma, scaled_c = basic_stats(IatSeries(iats.iats_us * 4))
        self.assertAlmostEqual(scaled_m1, 4 * m1, places=9)
        self.assertAlmostEqual(scaled_sigma, 4 * sigma, places=9)
        self.assertAlmostEqual(scaled_c, c, places=12)

    def test_single_sample(self):
        with self.assertRaises(TooFewSamples):
            basic_stats(IatSeries.from_ms([10.0]))


class HurstTests(SimpleTestCase):
    """Medians over a few seeds keep the sampling spread out of the assertions."""

    def median_estimate(self, estimator, series_factory, seeds=range(5)):
        return float(np.median([estimator(series_factory(seed)) for seed in seeds]))

    def test_iid_series_is_not_self_similar(self):
        self.assertTrue(0.43 <= self.median_estimate(hurst_peng, exponential_series) <= 0.57)
        self.assertTrue(0.40 <= self.median_estimate(hurst_periodogram, exponential_series) <= 0.60)
        self.assertTrue(0.40 <= self.median_estimate(hurst_boxed_periodogram, exponential_series) <= 0.60)

    def test_fgn_recovered(self):
        def fgn(seed):
            return generate_fgn(2 ** 14, 0.8, seed)

        for estimator in (hurst_peng, hurst_periodogram, hurst_boxed_periodogram):
            with self.subTest(estimator=estimator.__name__):
                self.assertAlmostEqual(self.median_estimate(estimator, fgn), 0.8, delta=0.1)

    def test_median_lands_near_half_for_iid_series(self):
        inside = sum(0.40 <= hurst_median(exponential_series(seed)) <= 0.60 for seed in range(50))
        self.assertGreaterEqual(inside, 45)

    def test_median_between_estimates(self):
        for seed in range(3):
            series = exponential_series(seed)
            estimates = [estimator(series) for estimator in (hurst_peng, hurst_periodogram, hurst_boxed_periodogram)]
            self.assertTrue(min(estimates) <= hurst_median(series) <= max(estimates))

    def test_scale_invariance(self):
        series = generate_fgn(4096, 0.7, seed=4)
        for estimator in (hurst_peng, hurst_periodogram, hurst_boxed_periodogram):
            with self.subTest(estimator=estimator.__name__):
                self.assertAlmostEqual(estimator(series * 7.5), estimator(series), places=9)

    def test_constant_series(self):
        with self.assertRaises(DegenerateSeries):
            hurst_peng([3.0] * 1000)

    def test_short_series(self):
        with self.assertRaises(TooFewSamples):
            hurst_periodogram(exponential_series(0, n=100))
        with self.assertRaises(TooFewSamples):
            hurst_boxed_periodogram(exponential_series(0, n=100))

    def test_estimates_are_clamped(self):
        for estimator in (hurst_peng, hurst_periodogram, hurst_boxed_periodogram):
            self.assertTrue(0 < estimator(exponential_series(1, n=2000)) < 1)

    def test_median_of_three(self):
        estimators = {'a': lambda s: 0.52, 'b': lambda s: 0.55, 'c': lambda s: 0.70}
        self.assertEqual(hurst_median([], estimators), 0.55)
        self.assertEqual(hurst_median([], {'a': lambda s: 0.5, 'b': lambda s: 0.5, 'c': lambda s: 0.5}), 0.5)

    def test_failing_estimator_is_named(self):
        with self.assertRaises(TooFewSamples) as ctx:
            hurst_median(exponential_series(0, n=100))
        self.assertIn('peng', str(ctx.exception))


class FgnTests(SimpleTestCase):

    def test_autocovariance(self):
        h = 0.8
        lag1 = []
        for seed in range(5):
            x = generate_fgn(2 ** 14, h, seed)
            lag1.append(np.mean(x[:-1] * x[1:]) / np.mean(x * x))
        expected = 0.5 * (2 ** (2 * h) - 2)
        self.assertAlmostEqual(float(np.mean(lag1)), expected, delta=0.03)

    def test_deterministic(self):
        np.testing.assert_array_equal(generate_fgn(1000, 0.7, 3), generate_fgn(1000, 0.7, 3))


class ClassificationTests(SimpleTestCase):

    def test_branches(self):
        self.assertEqual(classify_branch(stats(1.3, 0.7)), FitBranch.HYPEREXPONENTIAL)
        self.assertEqual(classify_branch(stats(0.80, 0.54)), FitBranch.COXIAN)
        self.assertEqual(classify_branch(stats(0.5, 0.4)), FitBranch.UNSUPPORTED)

    def test_coxian_boundary_is_inclusive(self):
        self.assertEqual(classify_branch(stats(1 / math.sqrt(2), 0.6)), FitBranch.COXIAN)
        self.assertEqual(classify_branch(stats(1.0, 0.9)), FitBranch.COXIAN)

    def test_bursty_but_short_range(self):
        self.assertEqual(classify_branch(stats(1.5, 0.45)), FitBranch.UNSUPPORTED)

    def test_self_similarity(self):
        self.assertTrue(is_self_similar(0.63))
        self.assertFalse(is_self_similar(0.5))
        self.assertFalse(is_self_similar(1.0))


class TrafficStatsTests(SimpleTestCase):

    def test_low_confidence_warning(self):
        iats = IatSeries.from_ms(exponential_series(2, n=3000))
        with self.assertLogs('whitespace.stats', 'WARNING'):
            result = compute_traffic_stats(iats)
        self.assertTrue(result.low_confidence)
        self.assertEqual(result.n_samples, iats.count)

    def test_serialization(self):
        original = stats(0.9, 0.63, m1=141.5)
        self.assertEqual(TrafficStats.from_dict(original.to_dict()), original)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            TrafficStats(m1_ms=0.0, sigma_ms=1.0, c=1.0, h=0.6, n_samples=10)
