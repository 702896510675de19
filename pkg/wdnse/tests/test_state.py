from __future__ import annotations

import unittest

import numpy as np

import wdnse.tests.util.paths as WDN_PATHS
from wdnse.errors import DimensionError, NetworkValidationError
from wdnse.state import Measurement, MeasurementSet, StateVector
from wdnse.state import load_measurements, parse_measurements
from wdnse.tests import WdnseBaseTestClass


class StateVectorTestCase(WdnseBaseTestClass):
    NAME = "eight_node"

    def test_vector_layout(self) -> None:
        heads = {n: float(i) for i, n in enumerate(self.net.node_ids())}
        flows = {l: 100.0 + i for i, l in enumerate(self.net.link_ids())}
        state = StateVector.from_values(self.net, heads, flows)
        x = state.to_vector()
        self.assertEqual(x.shape, (17,))
        self.assertEqual(state.head(self.net, "1"), 6.0)
        self.assertEqual(state.flow(self.net, "9"), 108.0)
        self.assertEqual(x[self.net.node_count() + 8], 108.0)
        np.testing.assert_array_equal(state.pump_flows, [[108.0]])

    def test_multi_step(self) -> None:
        x = np.arange(34, dtype=float)
        state = StateVector.from_vector(self.net, x, 2)
        self.assertEqual(state.horizon, 2)
        self.assertEqual(state.node_heads(1)[0], 17.0)
        np.testing.assert_array_equal(state.to_vector(), x)

    def test_wrong_length(self) -> None:
        with self.assertRaises(DimensionError):
            StateVector.from_vector(self.net, np.zeros(16))

    def test_copy_is_independent(self) -> None:
        state = StateVector.from_vector(self.net, np.ones(17))
        other = state.copy()
        other.junction_heads[0, 0] = 5.0
        self.assertEqual(state.junction_heads[0, 0], 1.0)
        self.assertTrue(state.is_finite())


class MeasurementSetTestCase(WdnseBaseTestClass):
    NAME = "three_node"

    def test_reverse_duplicate_rejected(self) -> None:
        with self.assertRaises(ValueError):
            MeasurementSet([Measurement("2", "4", 1.0, 1.0),
                            Measurement("4", "2", -1.0, 1.0)])

    def test_same_pair_different_steps(self) -> None:
        meas = MeasurementSet([Measurement("2", "4", 1.0, 1.0, 0),
                               Measurement("2", "4", 2.0, 1.0, 1)])
        self.assertEqual(meas.sensors(), [("2", "4")])
        meas.validate_against(self.net, 2)
        with self.assertRaises(NetworkValidationError):
            meas.validate_against(self.net, 1)

    def test_weight_must_be_positive(self) -> None:
        with self.assertRaises(ValueError):
            MeasurementSet([Measurement("2", "4", 1.0, 0.0)])

    def test_scaled(self) -> None:
        meas = MeasurementSet([Measurement("2", "4", 1.0, 2.0)])
        np.testing.assert_array_equal(meas.scaled(5.0).weights(), [10.0])

    def test_fixed_heads(self) -> None:
        meas = parse_measurements({"measurements": [],
                                   "fixed": {"4": 555.0, "2": 705.0}})
        self.assertEqual(meas.fixed_heads(self.net), {"2": 705.0, "4": 555.0})
        junction_fix = parse_measurements({"fixed": {"3": 500.0}})
        with self.assertRaises(NetworkValidationError):
            junction_fix.validate_against(self.net)

    def test_demand_matrix(self) -> None:
        meas = parse_measurements({"demands": {"3": [150.0, 250.0]}})
        np.testing.assert_array_equal(meas.demand_matrix(self.net, 2),
                                      [[150.0], [250.0]])
        np.testing.assert_array_equal(MeasurementSet().demand_matrix(
            self.net, 1), [[200.0]])
        with self.assertRaises(NetworkValidationError):
            meas.validate_against(self.net, 3)

    def test_unknown_initial_flow(self) -> None:
        meas = parse_measurements({"initial_flows": {"99": 1.0}})
        with self.assertRaises(NetworkValidationError):
            meas.validate_against(self.net)


class MeasurementFileTestCase(unittest.TestCase):
    def test_list_form(self) -> None:
        meas = load_measurements(
            WDN_PATHS.measurements() / "three_node_list.json")
        self.assertEqual(len(meas.entries), 1)
        entry = meas.entries[0]
        self.assertEqual(entry.pair(), ("2", "4"))
        self.assertEqual(entry.value, 134.35)
        self.assertEqual(entry.step, 0)

    def test_object_form(self) -> None:
        meas = load_measurements(
            WDN_PATHS.measurements() / "eight_node_trust_tank.json")
        np.testing.assert_array_equal(meas.weights(), [1.0, 0.1])
        self.assertEqual(meas.initial_flows["6"], -50.0)

    def test_malformed(self) -> None:
        with self.assertRaises(ValueError):
            load_measurements(WDN_PATHS.measurements() / "malformed.json")

    def test_missing_file(self) -> None:
        with self.assertRaises(ValueError):
            load_measurements(WDN_PATHS.measurements() / "missing.json")
