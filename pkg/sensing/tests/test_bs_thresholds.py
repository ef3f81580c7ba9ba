import numpy as np
from django.test import SimpleTestCase

from sensing.bs_thresholds import (
    common_law, map_block_decision, run_detector, run_detector_generalized, sequential_decisions, stage_thresholds,
    thresholds_at_stage,
)
from sensing.exceptions import ContractViolation
from sensing.fusion_sim import compare_with_block_oracle
from sensing.scenario import Hypothesis, draw_slot, draw_slots
from sensing.tests.factories import ScenarioConfigFactory


class ThresholdTest(SimpleTestCase):

    def setUp(self):
        self.config = ScenarioConfigFactory()
        self.law = common_law(self.config)

    def test_final_stage_thresholds_coincide(self):
        low, high = thresholds_at_stage(8, -0.7, self.config, self.law)
        self.assertEqual(low, high)

    def test_thresholds_widen_with_reports_left(self):
        low, high = thresholds_at_stage(2, 1.5, self.config, self.law)
        self.assertLess(low, high)
        self.assertGreaterEqual(high - low, 2 * 6 * 1.5 - 1e-12)

    def test_batch_thresholds_match_single_stage(self):
        rng = np.random.default_rng(21)
        _, ordered = draw_slots(self.config, rng, 5).ordered()
        t_low, t_high = stage_thresholds(ordered, self.config, self.law)
        for row in range(5):
            for k in range(1, 9):
                low, high = thresholds_at_stage(k, ordered[row, k - 1], self.config, self.law)
                self.assertAlmostEqual(t_low[row, k - 1], low, places=12)
                self.assertAlmostEqual(t_high[row, k - 1], high, places=12)

    def test_k_equals_m_has_no_correction(self):
        config = ScenarioConfigFactory(M=8, K=8)
        low, high = thresholds_at_stage(8, 3.0, config, common_law(config))
        self.assertEqual((low, high), (0.0, 0.0))

    def test_non_identical_sensors_rejected(self):
        config = ScenarioConfigFactory(M=2, K=2, sigma2_s=(1.0, 3.0))
        with self.assertRaises(ContractViolation):
            common_law(config)


class DetectorTest(SimpleTestCase):

    def setUp(self):
        self.config = ScenarioConfigFactory()
        self.law = common_law(self.config)

    def test_one_dominant_report_stops_after_next_small_one(self):
        ordered = [(0, 40.0)] + [(i, 0.01) for i in range(1, 10)]
        outcome = run_detector(ordered, self.config, self.law)
        self.assertEqual(outcome.declared, Hypothesis.H1)
        self.assertEqual(outcome.stage, 2)
        self.assertAlmostEqual(outcome.sensing_time, 0.4)

    def test_short_report_list_rejected(self):
        with self.assertRaises(ContractViolation):
            run_detector([1.0, 0.5], self.config, self.law)

    def test_block_rule_needs_exactly_k_values(self):
        with self.assertRaises(ContractViolation):
            map_block_decision([1.0] * 9, self.config, self.law)

    def test_generalized_detector_agrees_for_energy_law(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            slot = draw_slot(self.config, rng)
            plain = run_detector(slot.ordered, self.config, self.law)
            general = run_detector_generalized(slot.ordered, self.config, self.law)
            self.assertEqual(plain, general)

    def test_sequential_decision_equals_block_decision(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            slot = draw_slot(self.config, rng)
            values = slot.ordered_values
            outcome = run_detector(slot.ordered, self.config, self.law)
            self.assertEqual(outcome.declared, map_block_decision(values[:8], self.config, self.law))

    def test_agreement_on_hundred_thousand_slots(self):
        report = compare_with_block_oracle(self.config, 100_000, seed=2024)
        self.assertIsNone(report.first_disagreement)
        self.assertEqual(report.agreements, 100_000)
        self.assertEqual(report.fraction, 1.0)

    def test_generalized_detector_matches_block_rule_for_shift_law(self):
        config = ScenarioConfigFactory(shift=True, M=40)
        report = compare_with_block_oracle(config, 10_000, seed=40, generalized=True)
        self.assertIsNone(report.first_disagreement)
        self.assertEqual(report.agreements, report.trials)
        law = common_law(config)
        rng = np.random.default_rng(41)
        for _ in range(300):
            slot = draw_slot(config, rng)
            outcome = run_detector_generalized(slot.ordered, config, law)
            self.assertEqual(outcome.declared, map_block_decision(slot.ordered_values[: config.K], config, law))

    def test_shift_model_stops_by_half_horizon(self):
        config = ScenarioConfigFactory(shift=True, M=20, K=8)
        law = common_law(config)
        _, ordered = draw_slots(config, np.random.default_rng(4), 20_000).ordered()
        _, stages = sequential_decisions(ordered, config, law)
        self.assertLessEqual(stages.mean(), 8 / 2 + 0.5)
