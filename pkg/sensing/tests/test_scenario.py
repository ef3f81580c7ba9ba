import math

import numpy as np
from django.test import SimpleTestCase

from sensing.exceptions import ContractViolation, InvalidScenario
from sensing.scenario import (
    Hypothesis, MeasurementModel, draw_slot, draw_slots, llr_from_block, llr_from_samples, rank_by_magnitude,
)
from sensing.tests.factories import ScenarioConfigFactory


class ScenarioConfigTest(SimpleTestCase):

    def test_defaults_broadcast_snr(self):
        config = ScenarioConfigFactory()
        self.assertEqual(config.sigma2_s, (2.0,) * 10)
        self.assertTrue(config.identical_sensors)
        self.assertEqual(config.log_prior_ratio(), 0.0)

    def test_full_slot_timing_is_accepted(self):
        # 1 - 0.2 - 8 * 0.1 is zero up to rounding
        config = ScenarioConfigFactory(K=8, tau=0.1)
        self.assertAlmostEqual(config.remaining_fraction(8), 0.0)

    def test_slot_timing_violation_names_invariant(self):
        with self.assertRaises(InvalidScenario) as ctx:
            ScenarioConfigFactory(K=9, M=10, tau=0.1)
        self.assertEqual(ctx.exception.invariant, "tau_s - tau_N - K*tau >= 0")
        self.assertIn("tau_s - tau_N - K*tau >= 0", str(ctx.exception))

    def test_k_above_m_rejected(self):
        with self.assertRaises(InvalidScenario):
            ScenarioConfigFactory(M=4, K=5, tau=0.05)

    def test_wrong_snr_list_length_rejected(self):
        with self.assertRaises(InvalidScenario):
            ScenarioConfigFactory(M=4, K=2, sigma2_s=(1.0, 2.0))

    def test_degenerate_priors(self):
        self.assertEqual(ScenarioConfigFactory(pi0=1.0).log_prior_ratio(), math.inf)
        self.assertEqual(ScenarioConfigFactory(pi0=0.0).log_prior_ratio(), -math.inf)

    def test_with_sensor_count_clips_horizon(self):
        config = ScenarioConfigFactory().with_sensor_count(5)
        self.assertEqual((config.M, config.K), (5, 5))
        self.assertEqual(len(config.sigma2_s), 5)

    def test_subset_keeps_selected_snrs(self):
        config = ScenarioConfigFactory(M=4, K=3, sigma2_s=(1.0, 2.0, 3.0, 4.0))
        reduced = config.subset({3, 1})
        self.assertEqual(reduced.sigma2_s, (2.0, 4.0))
        self.assertEqual(reduced.K, 2)

    def test_shift_model_default_offset(self):
        config = ScenarioConfigFactory(shift=True, sigma2_s=(4.0,))
        self.assertEqual(config.measurement_model, MeasurementModel.SHIFT_IN_MEAN)
        self.assertAlmostEqual(config.mean_offset(0), 1.0)

    def test_asymmetric_means_broadcast_and_follow_subsets(self):
        config = ScenarioConfigFactory(M=4, K=2, shift=True, shift_means=(1.0,), shift_center=(2.0, 2.0, -1.0, 0.5))
        self.assertEqual(config.mean_center(2), -1.0)
        self.assertFalse(config.identical_sensors)
        self.assertEqual(config.subset([3, 1]).shift_center, (2.0, 0.5))
        self.assertEqual(config.with_sensor_count(6).shift_center, (2.0,) * 6)
        self.assertEqual(config.as_dict()["shift_center"], [2.0, 2.0, -1.0, 0.5])

    def test_wrong_center_list_length_rejected(self):
        with self.assertRaises(InvalidScenario):
            ScenarioConfigFactory(M=3, K=2, shift=True, shift_center=(1.0, 2.0))


class LlrComputationTest(SimpleTestCase):

    def setUp(self):
        self.config = ScenarioConfigFactory(M=3, K=2, N=3)

    def test_energy_llr_closed_form(self):
        samples = [1.0, -2.0, 0.5]
        gamma = 2.0
        expected = 5.25 * gamma / (2 * (gamma + 1)) - 1.5 * math.log(3.0)
        self.assertAlmostEqual(llr_from_samples(samples, 0, self.config), expected, places=12)

    def test_shift_llr_closed_form(self):
        config = ScenarioConfigFactory(M=3, K=2, shift=True, sigma2_s=(4.0,))
        # mu = 1, sigma2 = 1: 2 * sum(x)
        self.assertAlmostEqual(llr_from_samples([0.5, 0.25, -1.0], 1, config), -0.5)

    def test_shift_llr_about_midpoint(self):
        # means 1 and 3: midpoint 2, half-gap 1, separation 4 N mu^2 / sigma^2 = 12
        config = ScenarioConfigFactory(M=2, K=2, shift=True, shift_means=(1.0,), shift_center=(2.0,))
        self.assertAlmostEqual(llr_from_samples([3.0, 3.0, 3.0], 0, config), 6.0)
        self.assertAlmostEqual(llr_from_samples([1.0, 1.0, 1.0], 1, config), -6.0)
        self.assertAlmostEqual(llr_from_samples([2.0, 2.0, 2.0], 0, config), 0.0)

    def test_center_does_not_change_drawn_llrs(self):
        centered = ScenarioConfigFactory(M=5, K=3, shift=True, shift_center=(4.0,))
        symmetric = ScenarioConfigFactory(M=5, K=3, shift=True)
        first = draw_slots(centered, np.random.default_rng(8), 500)
        second = draw_slots(symmetric, np.random.default_rng(8), 500)
        np.testing.assert_array_equal(first.truth, second.truth)
        np.testing.assert_allclose(first.llr, second.llr, rtol=0, atol=1e-10)

    def test_wrong_sample_count(self):
        with self.assertRaises(ContractViolation):
            llr_from_samples([1.0, 2.0], 0, self.config)

    def test_block_matches_single_sensor(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal((3, 3))
        block = llr_from_block(samples, self.config)
        singles = [llr_from_samples(samples[i], i, self.config) for i in range(3)]
        np.testing.assert_allclose(block, singles, rtol=1e-13)


class OrderingTest(SimpleTestCase):

    def test_rank_by_magnitude(self):
        ranked = rank_by_magnitude([0.3, -2.0, 1.5, -0.1])
        self.assertEqual([index for index, _ in ranked], [1, 2, 0, 3])
        self.assertEqual(ranked[0], (1, -2.0))

    def test_ties_keep_lower_index_first(self):
        ranked = rank_by_magnitude([1.0, -1.0, 0.5])
        self.assertEqual([index for index, _ in ranked], [0, 1, 2])

    def test_empty_list_rejected(self):
        with self.assertRaises(ContractViolation):
            rank_by_magnitude([])

    def test_draw_slot_is_ordered_and_seeded(self):
        config = ScenarioConfigFactory()
        first = draw_slot(config, np.random.default_rng(11))
        second = draw_slot(config, np.random.default_rng(11))
        self.assertEqual(first, second)
        magnitudes = np.abs(first.ordered_values)
        self.assertTrue(np.all(np.diff(magnitudes) <= 0))
        self.assertIn(first.true_hypothesis, (Hypothesis.H0, Hypothesis.H1))

    def test_prior_drives_truth_frequency(self):
        config = ScenarioConfigFactory(pi0=0.8)
        batch = draw_slots(config, np.random.default_rng(5), 20000)
        free = np.mean(batch.truth == Hypothesis.H0)
        self.assertLess(abs(free - 0.8), 3 * math.sqrt(0.16 / 20000))
