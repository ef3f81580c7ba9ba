import itertools
import math

import numpy as np
from django.test import SimpleTestCase
from scipy import integrate

from sensing.exceptions import ContractViolation
from sensing.llr_distributions import LlrLaw, beta, llr_pdf
from sensing.order_stats import (
    SensorEnsemble, block_joint_logpdf, conditional_pdf, conditional_pdf_identical, joint_consecutive_pdf, ranked_pdf,
    subset_polynomial, subset_weight_sum,
)
from sensing.scenario import Hypothesis, magnitude_order


def brute_subset_sum(m_sub, H, hi_arg, lo_arg, excluded, ensemble):
    included = [v for v in range(ensemble.M) if v not in excluded]
    total = 0.0
    for chosen in itertools.combinations(included, m_sub):
        term = 1.0
        for v in included:
            law = ensemble.laws[v]
            term *= float(beta(hi_arg, H, law)) if v in chosen else 1.0 - float(beta(lo_arg, H, law))
        total += term
    return total


class SubsetPolynomialTest(SimpleTestCase):

    def test_elementary_symmetric_coefficients(self):
        coeffs = subset_polynomial([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
        np.testing.assert_allclose(coeffs, [1.0, 6.0, 11.0, 6.0])

    def test_degree_truncation(self):
        coeffs = subset_polynomial([0.2, 0.5, 0.7], [0.8, 0.5, 0.3], degree=1)
        self.assertEqual(coeffs.shape, (2,))
        self.assertAlmostEqual(coeffs[0], 0.8 * 0.5 * 0.3)


class SubsetWeightSumTest(SimpleTestCase):

    def setUp(self):
        self.ensemble = SensorEnsemble(tuple(LlrLaw.energy(3, snr) for snr in (0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 1.5, 0.8)))

    def test_matches_enumeration(self):
        for m_sub in range(0, 6):
            for excluded in (set(), {0, 3}):
                fast = float(subset_weight_sum(m_sub, Hypothesis.H1, 1.7, 0.6, excluded, self.ensemble))
                slow = brute_subset_sum(m_sub, Hypothesis.H1, 1.7, 0.6, excluded, self.ensemble)
                self.assertAlmostEqual(fast, slow, delta=1e-12)

    def test_size_out_of_range(self):
        with self.assertRaises(ContractViolation):
            subset_weight_sum(8, Hypothesis.H0, 1.0, 0.5, {1}, self.ensemble)


class RankedDensityTest(SimpleTestCase):

    def setUp(self):
        self.law = LlrLaw.energy(3, 2.0)
        self.identical = SensorEnsemble.identical(self.law, 5)
        self.mixed = SensorEnsemble(tuple(LlrLaw.energy(3, snr) for snr in (1.0, 2.0, 4.0)))

    def test_normalization_all_ranks(self):
        for ensemble in (self.identical, self.mixed):
            low = min(law.support_low for law in ensemble.laws)
            for m in range(1, ensemble.M + 1):
                for H in Hypothesis:
                    mass, _ = integrate.quad(
                        lambda v: float(ranked_pdf(m, v, H, ensemble)), low, 90.0,
                        points=[0.0, 1.0, 3.0], limit=400, epsabs=1e-12,
                    )
                    self.assertAlmostEqual(mass, 1.0, delta=1e-6)

    def test_ranks_sum_to_marginal_identical(self):
        y = np.linspace(-1.6, 9.0, 20)
        for H in Hypothesis:
            total = sum(ranked_pdf(m, y, H, self.identical) for m in range(1, 6))
            np.testing.assert_allclose(total, 5 * llr_pdf(y, H, self.law), rtol=1e-8, atol=1e-300)

    def test_ranks_sum_to_marginals_mixed(self):
        y = np.linspace(-0.3, 6.0, 15)
        for H in Hypothesis:
            total = sum(ranked_pdf(m, y, H, self.mixed) for m in range(1, 4))
            expected = sum(llr_pdf(y, H, law) for law in self.mixed.laws)
            np.testing.assert_allclose(total, expected, rtol=1e-10)

    def test_rank_out_of_range(self):
        with self.assertRaises(ContractViolation):
            ranked_pdf(6, 0.5, Hypothesis.H0, self.identical)


class JointAndConditionalTest(SimpleTestCase):

    def setUp(self):
        self.law = LlrLaw.energy(3, 2.0)
        self.ensemble = SensorEnsemble.identical(self.law, 5)

    def test_joint_zero_when_magnitudes_out_of_order(self):
        self.assertEqual(float(joint_consecutive_pdf(2, 2.0, 1.0, Hypothesis.H0, self.ensemble)), 0.0)

    def test_identical_closed_form_matches_general_route(self):
        general = SensorEnsemble(tuple(LlrLaw.energy(3, 2.0 + 1e-13 * i) for i in range(5)))
        for m in (2, 3, 5):
            for H in Hypothesis:
                closed = float(conditional_pdf_identical(m, 0.4, -1.1, H, self.law, 5))
                routed = float(conditional_pdf(m, 0.4, -1.1, H, general))
                self.assertAlmostEqual(closed, routed, delta=1e-9 * max(1.0, closed))

    def test_conditional_integrates_to_one(self):
        gamma = 2.3
        for H in Hypothesis:
            mass, _ = integrate.quad(
                lambda a: float(conditional_pdf(3, a, gamma, H, self.ensemble)), -gamma, gamma,
                points=[0.0, -self.law.shift], limit=200,
            )
            self.assertAlmostEqual(mass, 1.0, places=7)

    def test_block_joint_rejects_unordered_block(self):
        with self.assertRaises(ContractViolation):
            block_joint_logpdf([0.5, -2.0], Hypothesis.H0, self.ensemble)

    def test_block_joint_of_two_matches_rank_chain(self):
        values = np.array([2.2, -0.9])
        for H in Hypothesis:
            chained = float(ranked_pdf(1, 2.2, H, self.ensemble)) * float(conditional_pdf(2, -0.9, 2.2, H, self.ensemble))
            self.assertAlmostEqual(math.exp(block_joint_logpdf(values, H, self.ensemble)), chained, delta=1e-12)


class MixedEnsembleTest(SimpleTestCase):

    def setUp(self):
        self.laws = tuple(LlrLaw.energy(3, gamma) for gamma in (1.0, 2.0, 4.0))
        self.ensemble = SensorEnsemble(self.laws)

    def test_joint_consecutive_integrates_to_one(self):
        floor = -max(law.shift for law in self.laws)
        cap = max(law.support_cap() for law in self.laws)
        for H in Hypothesis:
            mass = 0.0
            for low, high in ((floor, 0.0), (0.0, 5.0), (5.0, cap)):
                part, _ = integrate.dblquad(
                    lambda a, g: float(joint_consecutive_pdf(2, a, g, H, self.ensemble)),
                    low, high, lambda g: -abs(g), lambda g: abs(g),
                )
                mass += part
            self.assertAlmostEqual(mass, 1.0, delta=1e-4)

    def test_conditional_matches_sampled_histogram(self):
        rng = np.random.default_rng(2024)
        count = 400_000
        scales = np.array([law.scale1 for law in self.laws])
        shifts = np.array([law.shift for law in self.laws])
        llr = rng.chisquare(3, size=(count, 3)) * scales - shifts
        ordered = np.take_along_axis(llr, magnitude_order(llr), axis=1)
        near = (ordered[:, 0] >= 2.9) & (ordered[:, 0] <= 3.1)
        second = ordered[near, 1]
        self.assertGreater(second.size, 2000)
        edges = [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]
        breaks = [-law.shift for law in self.laws] + [0.0]
        for lo, hi in zip(edges[:-1], edges[1:]):
            expected, _ = integrate.quad(
                lambda a: float(conditional_pdf(2, a, 3.0, Hypothesis.H1, self.ensemble)), lo, hi,
                points=[p for p in breaks if lo < p < hi] or None, limit=200,
            )
            observed = np.mean((second >= lo) & (second < hi))
            self.assertAlmostEqual(observed, expected, delta=0.02, msg=f"bin [{lo}, {hi})")
