from __future__ import annotations

import dataclasses

import numpy as np

from wdnse.errors import EstimationError
from wdnse.estimator import EstimatorConfig, SuccessiveEstimator, assemble
from wdnse.estimator import default_initial_state, objective_value
from wdnse.estimator import residual, run
from wdnse.hydraulics import GPM_TO_CFS, pipe_headloss
from wdnse.linearization import update_coefficients
from wdnse.network import Network
from wdnse.network.incidence import build_incidence
from wdnse.oracle import max_equation_residual, solve_hydraulics
from wdnse.state import Measurement, MeasurementSet
from wdnse.tests import WdnseBaseTestClass
from wdnse.types import EstimateStatus, ObjectiveKind


TRUE_Q23 = 238.607
TRUE_Q34 = 38.607


class ThreeNodeEstimatorTestCase(WdnseBaseTestClass):
    NAME = "three_node"

    def headloss(self, link_id: str, q: float) -> float:
        pipe = self.net.link(link_id).as_pipe_link()
        assert pipe is not None
        return pipe_headloss(q, pipe.headloss_model())

    def determined(self) -> MeasurementSet:
        value = self.headloss("23", TRUE_Q23) + self.headloss("34", TRUE_Q34)
        return MeasurementSet([Measurement("2", "4", value, 1.0)])

    def conflicting(self, weights: tuple[float, float]) -> MeasurementSet:
        phi23 = self.headloss("23", TRUE_Q23)
        phi34 = self.headloss("34", TRUE_Q34)
        return MeasurementSet([
            Measurement("2", "3", phi23 - 1.0, weights[0]),
            Measurement("2", "4", phi23 + phi34 + 2.0, weights[1])])

    def config(self, **kwargs: object) -> EstimatorConfig:
        settings: dict[str, object] = {"max_iterations": 500}
        settings.update(kwargs)
        return EstimatorConfig(**settings)  # type: ignore[arg-type]

    def test_determined_recovers_flows(self) -> None:
        state, trace = run(self.net, self.determined(), self.config())
        self.assertEqual(trace.status, EstimateStatus.CONVERGED)
        self.assertAlmostEqual(state.flow(self.net, "23"), TRUE_Q23,
                               delta=1e-2)
        self.assertAlmostEqual(state.flow(self.net, "34"), TRUE_Q34,
                               delta=1e-2)
        self.assertAlmostEqual(state.head(self.net, "2"), 700.0, places=6)
        self.assertLess(trace.final_error(), 1e-4)

    def test_hard_equalities(self) -> None:
        state, _ = run(self.net, self.determined(), self.config())
        q23 = state.flow(self.net, "23")
        q34 = state.flow(self.net, "34")
        self.assertAlmostEqual(q23 - q34, 200.0, delta=1e-6)
        # At the fixed point the linear model reproduces the exact loss.
        drop = state.head(self.net, "2") - state.head(self.net, "3")
        self.assertAlmostEqual(drop, self.headloss("23", q23), delta=1e-3)
        self.assertLess(max_equation_residual(self.net, state), 1e-3)

    def test_absolute_objective_agrees(self) -> None:
        wls, _ = run(self.net, self.determined(), self.config())
        wabs, trace = run(self.net, self.determined(), self.config(
            objective_kind=ObjectiveKind.WEIGHTED_ABSOLUTE))
        self.assertTrue(trace.converged)
        np.testing.assert_allclose(wabs.link_flows(), wls.link_flows(),
                                   atol=1e-3)

    def test_trusted_measurement_wins(self) -> None:
        inc = build_incidence(self.net, [("2", "3"), ("2", "4")])
        for weights, trusted in (((1.0, 0.1), 0), ((0.1, 1.0), 1)):
            meas = self.conflicting(weights)
            state, _ = run(self.net, meas, self.config())
            eps = np.abs(residual(self.net, inc, meas, state))
            self.assertLess(eps[trusted], eps[1 - trusted])

    def test_weight_scaling_invariance(self) -> None:
        meas = self.conflicting((1.0, 0.5))
        state, _ = run(self.net, meas, self.config())
        scaled, _ = run(self.net, meas.scaled(10.0), self.config())
        np.testing.assert_allclose(scaled.to_vector(), state.to_vector(),
                                   atol=1e-6)

    def test_infeasible_subproblem(self) -> None:
        meas = MeasurementSet([], fixed={"4": 650.0})
        with self.assertRaises(EstimationError) as ctx:
            run(self.net, meas, self.config())
        self.assertEqual(ctx.exception.iteration, 1)

    def test_iteration_limit(self) -> None:
        _, trace = run(self.net, self.determined(),
                       self.config(max_iterations=2))
        self.assertEqual(trace.status, EstimateStatus.ITERATION_LIMIT)
        self.assertEqual(trace.iterations, 2)
        self.assertEqual([r.n for r in trace.records], [1, 2])

    def test_acceleration_schedule(self) -> None:
        _, trace = run(self.net, self.determined(), self.config())
        for record in trace.records:
            if record.accelerated:
                self.assertEqual(record.n % 4, 0)
        _, plain = run(self.net, self.determined(),
                       self.config(acceleration_gain=0.0))
        self.assertFalse(any(r.accelerated for r in plain.records))
        self.assertTrue(plain.converged)

    def test_reference_trace(self) -> None:
        meas = self.determined()
        reference, _ = run(self.net, meas, self.config())
        estimator = SuccessiveEstimator(self.net, meas, self.config())
        _, trace = estimator.run(default_initial_state(self.net, meas),
                                 reference)
        errors = [r.reference_error for r in trace.records]
        self.assertTrue(all(e is not None for e in errors))
        assert errors[-1] is not None
        self.assertLess(errors[-1], 1e-3)

    def test_assembled_program(self) -> None:
        meas = self.determined()
        cfg = self.config()
        inc = build_incidence(self.net, meas.sensors())
        state = default_initial_state(self.net, meas)
        coeffs = update_coefficients(self.net, state)
        program = assemble(self.net, inc, meas, coeffs, cfg)
        # mass balance, two pipes, one reservoir head
        self.assertEqual(program.equality_matrix.shape, (4, 5))
        self.assertEqual(program.residual_matrix.shape, (1, 5))
        self.assertEqual(program.lower[self.net.node_index["4"]], 500.0)
        self.assertEqual(program.upper[self.net.node_index["4"]], 600.0)
        self.assertEqual(program.lower[self.net.node_index["2"]], -np.inf)

    def test_objective_helpers(self) -> None:
        meas = self.conflicting((2.0, 1.0))
        eps = np.array([1.0, -3.0])
        self.assertEqual(objective_value(meas, eps), 11.0)
        self.assertEqual(objective_value(
            meas, eps, ObjectiveKind.WEIGHTED_ABSOLUTE), 5.0)

    def test_default_initial_state(self) -> None:
        meas = MeasurementSet([], fixed={"4": 555.0},
                              initial_flows={"23": 250.0})
        state = default_initial_state(self.net, meas, horizon=2)
        self.assertEqual(state.horizon, 2)
        self.assertEqual(state.head(self.net, "4", 1), 555.0)
        self.assertEqual(state.head(self.net, "3"), 400.0)
        self.assertEqual(state.flow(self.net, "23"), 250.0)
        self.assertEqual(state.flow(self.net, "34"), 100.0)

    def test_config_validation(self) -> None:
        with self.assertRaises(ValueError):
            EstimatorConfig(threshold=0.0)
        with self.assertRaises(ValueError):
            EstimatorConfig(acceleration_period=1)
        with self.assertRaises(ValueError):
            EstimatorConfig(horizon=0)


class ThreeNodeHorizonTestCase(WdnseBaseTestClass):
    NAME = "three_node"

    def test_tank_dynamics(self) -> None:
        pipe23 = self.net.link("23").as_pipe_link()
        pipe34 = self.net.link("34").as_pipe_link()
        assert pipe23 is not None and pipe34 is not None
        value = (pipe_headloss(TRUE_Q23, pipe23.headloss_model())
                 + pipe_headloss(TRUE_Q34, pipe34.headloss_model()))
        meas = MeasurementSet([Measurement("2", "4", value, 1.0, 0)],
                              demands={"3": [200.0, 150.0]})
        cfg = EstimatorConfig(max_iterations=500, horizon=2)
        state, trace = run(self.net, meas, cfg)
        self.assertTrue(trace.converged)

        tank = self.net.tanks[0]
        rise = state.head(self.net, "4", 1) - state.head(self.net, "4", 0)
        expected = (self.net.options.hydraulic_step * GPM_TO_CFS / tank.area
                    * state.flow(self.net, "34", 0))
        self.assertAlmostEqual(rise, expected, delta=1e-6)
        balance = (state.flow(self.net, "23", 1)
                   - state.flow(self.net, "34", 1))
        self.assertAlmostEqual(balance, 150.0, delta=1e-6)


class EightNodeEstimatorTestCase(WdnseBaseTestClass):
    NAME = "eight_node"

    def test_determined_matches_hydraulics(self) -> None:
        meas = self.measurements("eight_node_hydraulic")
        state, trace = run(self.net, meas, EstimatorConfig())
        self.assertTrue(trace.converged)
        self.assertLessEqual(trace.iterations, 100)
        truth = solve_hydraulics(self.net, {"8": 834.0})
        distance = float(np.linalg.norm(state.to_vector()
                                        - truth.state.to_vector()))
        self.assertLessEqual(distance, 0.5)

    def test_trust_ordering(self) -> None:
        cfg = EstimatorConfig(max_iterations=800)
        eps: dict[str, np.ndarray] = {}
        for name in ("eight_node_trust_tank", "eight_node_trust_junction"):
            meas = self.measurements(name)
            inc = build_incidence(self.net, meas.sensors())
            state, _ = run(self.net, meas, cfg)
            eps[name] = np.abs(residual(self.net, inc, meas, state))
        # Each sensor fits better in the case that trusts it.
        self.assertLess(eps["eight_node_trust_tank"][0],
                        eps["eight_node_trust_junction"][0])
        self.assertLess(eps["eight_node_trust_junction"][1],
                        eps["eight_node_trust_tank"][1])

    def test_uniform_start_is_infeasible(self) -> None:
        # From 100 GPM in every link the first program has no feasible point.
        meas = MeasurementSet([], fixed={"8": 834.0})
        with self.assertRaises(EstimationError) as ctx:
            run(self.net, meas, EstimatorConfig())
        self.assertEqual(ctx.exception.iteration, 1)

    def test_published_main_targets(self) -> None:
        cfg = EstimatorConfig(max_iterations=800)
        tank_case, _ = run(self.net,
                           self.measurements("eight_node_trust_tank"), cfg)
        self.assertAlmostEqual(tank_case.head(self.net, "8"), 834.56,
                               delta=0.1)
        junction_case, _ = run(
            self.net, self.measurements("eight_node_trust_junction"), cfg)
        self.assertAlmostEqual(junction_case.head(self.net, "3"), 875.81,
                               delta=0.2)

    def test_pump_lower_bound_above_gain_limit(self) -> None:
        meas = self.measurements("eight_node_hydraulic")
        inc = build_incidence(self.net, meas.sensors())
        state = default_initial_state(self.net, meas)
        coeffs = update_coefficients(self.net, state)
        gain_limit = -coeffs.pump_intercepts[0, 0] / coeffs.pump_slopes[0, 0]
        pump = dataclasses.replace(self.net.pumps[0],
                                   flow_bounds=(gain_limit + 10.0, 1e4))
        net = Network(self.net.junctions, self.net.reservoirs,
                      self.net.tanks, self.net.pipes, [pump],
                      self.net.options)
        with self.assertRaises(EstimationError) as ctx:
            assemble(net, inc, meas, coeffs, EstimatorConfig(), iteration=3)
        self.assertEqual(ctx.exception.iteration, 3)
        self.assertIn("Pump 9", str(ctx.exception))
