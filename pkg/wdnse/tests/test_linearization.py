from __future__ import annotations

import unittest

import numpy as np

from wdnse.errors import DimensionError, HydraulicDomainError
from wdnse.hydraulics import HeadLossModel, PumpCurve, pipe_headloss
from wdnse.hydraulics import pipe_headloss_slope, pump_headgain
from wdnse.linearization import PUMP_FLOW_FLOOR, GpConfig
from wdnse.linearization import LinearCoefficients, gp_linear_equivalence
from wdnse.linearization import gp_pump_equivalence, pipe_coefficient
from wdnse.linearization import pump_coefficients, update_coefficients
from wdnse.state import StateVector
from wdnse.tests import WdnseBaseTestClass


class PipeCoefficientTestCase(unittest.TestCase):
    model = HeadLossModel(0.005028, 1.852)

    def test_direct_formula(self) -> None:
        for q in (238.538, 38.528):
            expected = q * (0.005028 * q ** 0.852 - 1.0)
            self.assertAlmostEqual(pipe_coefficient(q, self.model), expected,
                                   places=10)

    def test_exact_at_previous_flow(self) -> None:
        for q in (-75.0, 0.0, 38.528, 238.538):
            constant = pipe_coefficient(q, self.model)
            self.assertAlmostEqual(q + constant,
                                   pipe_headloss(q, self.model), places=9)

    def test_not_a_taylor_expansion(self) -> None:
        # The linear model has unit slope in q, which is not the tangent.
        q = 238.538
        tangent = pipe_headloss_slope(q, self.model, regularize=False)
        self.assertGreater(abs(tangent - 1.0), 1e-3)
        step = 10.0
        linear = (q + step) + pipe_coefficient(q, self.model)
        taylor = pipe_headloss(q, self.model) + tangent * step
        self.assertGreater(abs(linear - taylor), 1e-3)


class PumpCoefficientTestCase(unittest.TestCase):
    curve = PumpCurve(200.001, 2.76e-5, 2.0)

    def test_exact_at_previous_flow(self) -> None:
        for q in (1.0, 850.0, 1500.0):
            intercept, slope = pump_coefficients(q, self.curve)
            self.assertEqual(intercept, -200.001)
            self.assertAlmostEqual(intercept + slope * q,
                                   pump_headgain(q, self.curve), places=9)

    def test_needs_positive_flow(self) -> None:
        with self.assertRaises(HydraulicDomainError):
            pump_coefficients(0.0, self.curve)
        with self.assertRaises(HydraulicDomainError):
            pump_coefficients(-3.0, self.curve)


class GpEquivalenceTestCase(unittest.TestCase):
    model = HeadLossModel(0.005028, 1.852)
    curve = PumpCurve(200.001, 2.76e-5, 2.0)

    def test_pipe_equivalence(self) -> None:
        q = 120.0
        loss = pipe_headloss(q, self.model)
        self.assertTrue(gp_linear_equivalence(q, 700.0, 700.0 - loss,
                                              self.model))
        self.assertFalse(gp_linear_equivalence(q, 700.0, 699.0 - loss,
                                               self.model))

    def test_base_does_not_matter(self) -> None:
        q = -40.0
        loss = pipe_headloss(q, self.model)
        for base in (1.0001, 1.001, 1.5):
            self.assertTrue(gp_linear_equivalence(
                q, 600.0, 600.0 - loss, self.model, GpConfig(base)))

    def test_pump_equivalence(self) -> None:
        q = 850.0
        gain = pump_headgain(q, self.curve)
        self.assertTrue(gp_pump_equivalence(q, 700.0, 700.0 - gain,
                                            self.curve))
        self.assertFalse(gp_pump_equivalence(q, 700.0, 701.0 - gain,
                                             self.curve))

    def test_config(self) -> None:
        self.assertAlmostEqual(GpConfig.from_delta(0.01).base, 1.01)
        self.assertAlmostEqual(GpConfig().delta, 0.001)
        with self.assertRaises(ValueError):
            GpConfig(1.0)


class UpdateCoefficientsTestCase(WdnseBaseTestClass):
    NAME = "eight_node"

    def test_shapes_and_pump_floor(self) -> None:
        heads = {n: 800.0 for n in self.net.node_ids()}
        flows = {l: 100.0 for l in self.net.link_ids()}
        flows["9"] = -5.0
        state = StateVector.from_values(self.net, heads, flows)
        coeffs = update_coefficients(self.net, state)
        self.assertEqual(coeffs.pipe_constants.shape, (1, 8))
        self.assertEqual(coeffs.pump_slopes.shape, (1, 1))
        pump = self.net.pumps[0]
        _, floor_slope = pump_coefficients(PUMP_FLOW_FLOOR, pump.curve)
        self.assertAlmostEqual(coeffs.pump_slopes[0, 0], floor_slope)

    def test_pipe_constants_match_formula(self) -> None:
        heads = {n: 800.0 for n in self.net.node_ids()}
        flows = {l: 50.0 + 10.0 * i
                 for i, l in enumerate(self.net.link_ids())}
        state = StateVector.from_values(self.net, heads, flows)
        coeffs = update_coefficients(self.net, state)
        for i, pipe in enumerate(self.net.pipes):
            self.assertAlmostEqual(
                coeffs.pipe_constants[0, i],
                pipe_coefficient(flows[pipe.id], pipe.headloss_model()))

    def test_coefficients_validated(self) -> None:
        with self.assertRaises(DimensionError):
            LinearCoefficients(np.zeros(3), np.zeros((1, 1)),
                               np.zeros((1, 1)))
        with self.assertRaises(HydraulicDomainError):
            LinearCoefficients(np.full((1, 2), np.nan), np.zeros((1, 1)),
                               np.zeros((1, 1)))

    def test_coefficients_ignore_base(self) -> None:
        rng = np.random.default_rng(105)
        heads = {n: 800.0 for n in self.net.node_ids()}
        for _ in range(20):
            flows = {l: float(rng.uniform(-500.0, 1500.0))
                     for l in self.net.link_ids()}
            state = StateVector.from_values(self.net, heads, flows)
            small = update_coefficients(self.net, state, GpConfig(1.001))
            large = update_coefficients(self.net, state, GpConfig(1.5))
            for name in ("pipe_constants", "pump_intercepts", "pump_slopes"):
                np.testing.assert_allclose(getattr(small, name),
                                           getattr(large, name),
                                           rtol=1e-12, atol=0.0)


class RandomizedIdentityTestCase(unittest.TestCase):
    """Identities checked over seeded random samples."""

    def random_model(self, rng: np.random.Generator) -> HeadLossModel:
        return HeadLossModel(rng.uniform(1e-3, 0.1), rng.uniform(1.5, 2.0))

    def random_flow(self, rng: np.random.Generator) -> float:
        return float(rng.choice([-1.0, 1.0]) * rng.uniform(10.0, 2000.0))

    def test_pipe_linear_form_exact_at_previous_flow(self) -> None:
        rng = np.random.default_rng(101)
        for _ in range(10_000):
            model = self.random_model(rng)
            q = self.random_flow(rng)
            loss = pipe_headloss(q, model)
            self.assertLessEqual(abs(q + pipe_coefficient(q, model) - loss),
                                 1e-12 * abs(loss))

    def test_pump_linear_form_exact_at_previous_flow(self) -> None:
        rng = np.random.default_rng(102)
        for _ in range(10_000):
            curve = PumpCurve(rng.uniform(50.0, 300.0),
                              rng.uniform(1e-6, 1e-3), rng.uniform(1.5, 2.5))
            q = float(rng.uniform(1.0, 2000.0))
            intercept, slope = pump_coefficients(q, curve)
            gain = pump_headgain(q, curve)
            scale = max(abs(intercept), abs(slope * q))
            self.assertLessEqual(abs(intercept + slope * q - gain),
                                 1e-12 * scale)

    def test_tangent_slope_differs_from_one(self) -> None:
        rng = np.random.default_rng(103)
        model = HeadLossModel(0.005028, 1.852)
        # The tangent crosses 1 at a single flow, so only a handful of
        # samples may land near it.
        slopes = np.array([
            pipe_headloss_slope(self.random_flow(rng), model,
                                regularize=False) for _ in range(1000)])
        self.assertGreaterEqual(int(np.sum(np.abs(slopes - 1.0) > 1e-3)),
                                990)
        self.assertGreater(float(np.ptp(slopes)), 1.0)

    def test_equivalence_at_both_bases(self) -> None:
        rng = np.random.default_rng(104)
        for base in (1.001, 1.5):
            cfg = GpConfig(base)
            for _ in range(1000):
                model = self.random_model(rng)
                q = self.random_flow(rng)
                h_j = float(rng.uniform(500.0, 1000.0))
                h_i = h_j + pipe_headloss(q, model)
                self.assertTrue(gp_linear_equivalence(q, h_i, h_j, model,
                                                      cfg))
                self.assertFalse(gp_linear_equivalence(q, h_i + 0.5, h_j,
                                                       model, cfg))

                curve = PumpCurve(rng.uniform(50.0, 300.0),
                                  rng.uniform(1e-6, 1e-4), 2.0)
                q_pump = float(rng.uniform(1.0, curve.max_flow()))
                h_i = h_j + pump_headgain(q_pump, curve)
                self.assertTrue(gp_pump_equivalence(q_pump, h_i, h_j, curve,
                                                    cfg))
