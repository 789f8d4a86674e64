import math

import numpy as np
from django.test import SimpleTestCase

from whitespace.exceptions import NumericalFailure, UnsupportedRegime
from whitespace.mmpp import (Mmpp2Params, coxian_phase, fit_mmpp2, fit_phase, generate_segments, generate_trace,
                             generator_matrix, hyperexponential_phase, mean_arrival_rate, y_lower_bound)
from whitespace.rng import make_rng
from whitespace.stats import FitBranch, TrafficStats, basic_stats, compute_traffic_stats
from whitespace.trace_io import extract_iats

from .factories import TWO_REGIME

CHANNEL_20 = TrafficStats(m1_ms=141.5, sigma_ms=0.90 * 141.5, c=0.90, h=0.63, n_samples=7000)


def phase_moments(phase):
    """Mean and second moment of the phase mixture p*Exp(mu1) + (1-p)*Exp(mu2)."""
    p, mu1, mu2 = phase.p, phase.mu1_per_ms, phase.mu2_per_ms
    return p / mu1 + (1 - p) / mu2, 2 * p / mu1 ** 2 + 2 * (1 - p) / mu2 ** 2


class PhaseFitTests(SimpleTestCase):

    def test_hyperexponential_limit(self):
        phase = hyperexponential_phase(10.0, 1.0)
        self.assertAlmostEqual(phase.p, 0.5)
        self.assertAlmostEqual(phase.mu1_per_ms, 0.1)
        self.assertAlmostEqual(phase.mu2_per_ms, 0.1)

    def test_hyperexponential_matches_mean_and_cv(self):
        phase = fit_phase(TrafficStats(m1_ms=10.0, sigma_ms=15.0, c=1.5, h=0.8, n_samples=10000))
        self.assertEqual(phase.branch, FitBranch.HYPEREXPONENTIAL)
        mean, second = phase_moments(phase)
        self.assertAlmostEqual(mean, 10.0)
        self.assertAlmostEqual(math.sqrt(second - mean ** 2) / mean, 1.5)

    def test_coxian_channel_11(self):
        phase = fit_phase(TrafficStats(m1_ms=18.6, sigma_ms=0.80 * 18.6, c=0.80, h=0.54, n_samples=7000))
        self.assertEqual(phase.branch, FitBranch.COXIAN)
        self.assertAlmostEqual(phase.p, 0.78125)
        self.assertAlmostEqual(phase.mu2_per_ms, 2 / 18.6)
        self.assertAlmostEqual(phase.mu1_per_ms, 0.04716, places=5)

    def test_coxian_simulated_mean(self):
        # The triple is read as a two-branch mixture: Exp(mu1) with probability p, else Exp(mu2)
        phase = coxian_phase(18.6, 0.80)
        rng = make_rng(11)
        n = 10 ** 6
        samples = np.where(rng.random(n) < phase.p, rng.exponential(1 / phase.mu1_per_ms, n),
                           rng.exponential(1 / phase.mu2_per_ms, n))
        self.assertAlmostEqual(phase.mean_ms, 18.6)
        self.assertAlmostEqual(float(samples.mean()), 18.6, delta=0.01 * 18.6)

    def test_unsupported(self):
        with self.assertRaises(UnsupportedRegime) as ctx:
            fit_phase(TrafficStats(m1_ms=10.0, sigma_ms=5.0, c=0.5, h=0.4, n_samples=7000))
        self.assertIn('classify_branch', str(ctx.exception))


class MmppFitTests(SimpleTestCase):

    def test_channel_20(self):
        mmpp = fit_mmpp2(fit_phase(CHANNEL_20), CHANNEL_20.h)
        expected = {'lambda1_per_ms': 0.0120356, 'lambda2_per_ms': 0.00468825, 'r1_per_ms': 0.00189687,
                    'r2_per_ms': 0.000908327}
        for name, value in expected.items():
            self.assertAlmostEqual(getattr(mmpp, name), value, delta=1e-3 * value, msg=name)
        self.assertAlmostEqual(1 / mean_arrival_rate(mmpp), 141.5, delta=0.01)

    def test_channel_20_generated_mean(self):
        mmpp = fit_mmpp2(fit_phase(CHANNEL_20), CHANNEL_20.h)
        trace = generate_trace(mmpp, 141.5 * 10 ** 6, seed=4)
        m1, _, _ = basic_stats(extract_iats(trace))
        self.assertAlmostEqual(m1, 141.5, delta=0.02 * 141.5)

    def test_hyperexponential_preserves_moments(self):
        stats = TrafficStats(m1_ms=10.0, sigma_ms=15.0, c=1.5, h=0.8, n_samples=10000)
        mmpp = fit_mmpp2(fit_phase(stats), stats.h)
        self.assertAlmostEqual(1 / mean_arrival_rate(mmpp), 10.0, delta=1e-6)

    def test_identical_phases_fail(self):
        with self.assertRaises(NumericalFailure):
            fit_mmpp2(hyperexponential_phase(10.0, 1.0), 0.7)

    def test_invalid_hurst(self):
        with self.assertRaises(NumericalFailure):
            fit_mmpp2(hyperexponential_phase(10.0, 1.5), 1.0)

    def test_serialization(self):
        mmpp = fit_mmpp2(fit_phase(CHANNEL_20), CHANNEL_20.h)
        data = mmpp.to_dict()
        self.assertEqual(data['branch'], 'Coxian')
        self.assertAlmostEqual(sum(data['pi']), 1.0)
        restored = Mmpp2Params.from_dict(data)
        self.assertEqual(restored.r2_per_ms, mmpp.r2_per_ms)
        self.assertEqual(restored.branch, FitBranch.COXIAN)


class MmppPropertyTests(SimpleTestCase):

    def test_y_lower_bound(self):
        self.assertAlmostEqual(y_lower_bound(Mmpp2Params(1.0, 0.5, 0.01, 0.01)), 200.0)
        self.assertAlmostEqual(y_lower_bound(Mmpp2Params(1.0, 0.5, 0.02, 0.005)), 250.0)

    def test_steady_state(self):
        mmpp = Mmpp2Params(1.0, 0.1, 0.1, 0.01)
        np.testing.assert_allclose(mmpp.pi, [0.01 / 0.11, 0.1 / 0.11])
        np.testing.assert_allclose(mmpp.pi @ generator_matrix(mmpp), [0.0, 0.0], atol=1e-15)

    def test_rates_must_be_positive(self):
        with self.assertRaises(ValueError):
            Mmpp2Params(1.0, 0.0, 0.1, 0.1)


class GenerationTests(SimpleTestCase):

    def test_indistinguishable_states_are_poisson(self):
        trace = generate_trace(Mmpp2Params(1.0, 1.0, 0.05, 0.02), 10 ** 6, seed=2)
        m1, _, c = basic_stats(extract_iats(trace))
        self.assertAlmostEqual(m1, 1.0, delta=0.01)
        self.assertAlmostEqual(c, 1.0, delta=0.02)

    def test_deterministic(self):
        params = Mmpp2Params(1.0, 0.1, 0.1, 0.01)
        a = generate_trace(params, 5000.0, seed=9)
        b = generate_trace(params, 5000.0, seed=9)
        np.testing.assert_array_equal(a.timestamps_us, b.timestamps_us)
        self.assertEqual(a.source_channels, frozenset({0}))

    def test_arrivals_within_duration(self):
        trace = generate_trace(Mmpp2Params(1.0, 0.1, 0.1, 0.01), 2000.0, seed=1)
        self.assertTrue(np.all(trace.timestamps_us < 2000 * 1000))
        self.assertTrue(np.all(np.diff(trace.timestamps_us) >= 0))

    def test_arrival_count_concentrates(self):
        params = Mmpp2Params(1.0, 0.1, 0.1, 0.01)
        duration_ms = 10 ** 6
        rate = mean_arrival_rate(params)
        r1, r2 = params.r1_per_ms, params.r2_per_ms
        # Long-run count variance of a two-state MMPP
        variance = duration_ms * (rate + 2 * (params.lambda1_per_ms - params.lambda2_per_ms) ** 2 * r1 * r2
                                  / (r1 + r2) ** 3)
        for seed in range(3):
            with self.subTest(seed=seed):
                count = len(generate_trace(params, duration_ms, seed=seed))
                self.assertLess(abs(count - rate * duration_ms), 3 * math.sqrt(variance))

    def test_segments_reach_requested_count(self):
        params = Mmpp2Params(1.0, 0.1, 0.1, 0.01)
        iats = generate_segments(params, y_lower_bound(params), 5000, seed=3)
        self.assertGreaterEqual(iats.count, 5000)

    def test_round_trip(self):
        trace = generate_trace(TWO_REGIME, 5 * 10 ** 6, seed=5)
        stats = compute_traffic_stats(extract_iats(trace))
        phase = fit_phase(stats)
        self.assertEqual(phase.branch, FitBranch.HYPEREXPONENTIAL)
        mmpp = fit_mmpp2(phase, stats.h)

        mean, second = phase_moments(phase)
        self.assertAlmostEqual(1 / mean_arrival_rate(mmpp), stats.m1_ms, delta=0.02 * stats.m1_ms)
        self.assertAlmostEqual(math.sqrt(second - mean ** 2) / mean, stats.c, delta=0.05 * stats.c)
