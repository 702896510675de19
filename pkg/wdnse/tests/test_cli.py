from __future__ import annotations

import json
import pathlib
import subprocess
import sys
import tempfile
import unittest

import wdnse.tests.util.paths as WDN_PATHS
from wdnse import __version__
from wdnse.estimator import IterationTrace
from wdnse.serialize import read_csv_rows, write_compare_csv
from wdnse.serialize import write_reference_csv, write_trace_csv


THREE_NODE = WDN_PATHS.networks() / "three_node.inp"
THREE_NODE_MEAS = WDN_PATHS.measurements() / "three_node_list.json"
EIGHT_NODE = WDN_PATHS.networks() / "eight_node.inp"
EIGHT_NODE_FIXED = WDN_PATHS.measurements() / "eight_node_hydraulic.json"


def run_tool(*args: str) -> subprocess.CompletedProcess[str]:
    cmd = [sys.executable, str(WDN_PATHS.run_script()), *args]
    return subprocess.run(cmd, capture_output=True, text=True, check=False,
                          cwd=WDN_PATHS.run_script().parent)


class CommandLineTestCase(unittest.TestCase):
    out: pathlib.Path

    def setUp(self) -> None:
        # pylint: disable-next=consider-using-with
        self.tmp = tempfile.TemporaryDirectory()
        self.out = pathlib.Path(self.tmp.name)

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def estimate(self, out_dir: pathlib.Path, *extra: str
                 ) -> subprocess.CompletedProcess[str]:
        return run_tool("estimate", "--network", str(THREE_NODE),
                        "--measurements", str(THREE_NODE_MEAS),
                        "--max-iter", "500", "--out", str(out_dir), *extra)

    def simulate(self, out_dir: pathlib.Path, network: pathlib.Path,
                 measurements: pathlib.Path
                 ) -> subprocess.CompletedProcess[str]:
        return run_tool("simulate", "--network", str(network),
                        "--measurements", str(measurements), "--seed", "1",
                        "--starts", "4", "--out", str(out_dir))

    def test_simulate_writes_truth(self) -> None:
        done = self.simulate(self.out, THREE_NODE, THREE_NODE_MEAS)
        self.assertEqual(done.returncode, 0, done.stderr)
        data = json.loads((self.out / "truth.json").read_text())
        self.assertEqual(data["meta"]["versions"]["tool"], str(__version__))
        report = data["report"]
        self.assertEqual(report["method"], "global-estimate")
        self.assertEqual(report["seed"], 1)
        self.assertEqual(set(report["steps"][0]["heads ft"]), {"2", "3", "4"})

    def test_estimate_is_reproducible(self) -> None:
        first, second = self.out / "a", self.out / "b"
        for out_dir in (first, second):
            done = self.estimate(out_dir)
            self.assertEqual(done.returncode, 0, done.stderr)
        for name in ("state.json", "trace.csv"):
            self.assertEqual((first / name).read_bytes(),
                             (second / name).read_bytes())
        rows = read_csv_rows(first / "trace.csv")
        self.assertEqual(rows[0]["n"], "1")
        self.assertIn(rows[-1]["accelerated"], ("true", "false"))
        report = json.loads((first / "report.json").read_text())["report"]
        self.assertEqual(report["status"], "converged")
        self.assertEqual(report["iterations"], len(rows))
        self.assertEqual(report["manifest"]["overrides"]["max_iter"], "500")

    def test_compare_to_truth(self) -> None:
        truth_dir, estimate_dir = self.out / "truth", self.out / "estimate"
        self.assertEqual(
            self.simulate(truth_dir, THREE_NODE, THREE_NODE_MEAS).returncode,
            0)
        done = self.estimate(estimate_dir, "--truth",
                             str(truth_dir / "truth.json"))
        self.assertEqual(done.returncode, 0, done.stderr)
        reference = read_csv_rows(estimate_dir / "reference.csv")
        self.assertLess(float(reference[-1]["reference_error"]), 0.5)

        done = run_tool("compare", str(estimate_dir / "state.json"),
                        str(truth_dir / "truth.json"))
        self.assertEqual(done.returncode, 0, done.stderr)
        report = json.loads(done.stdout)["report"]
        self.assertEqual(report["variables"], 5)
        self.assertLessEqual(report["norm"], 0.5)
        rows = read_csv_rows(estimate_dir / "compare.csv")
        self.assertEqual(len(rows), 5)
        self.assertEqual(rows[0]["variable"], "head:3")

    def test_iteration_limit_exit_code(self) -> None:
        done = run_tool("estimate", "--network", str(THREE_NODE),
                        "--measurements", str(THREE_NODE_MEAS),
                        "--max-iter", "1", "--out", str(self.out))
        self.assertEqual(done.returncode, 2)
        report = json.loads((self.out / "report.json").read_text())["report"]
        self.assertEqual(report["status"], "iteration-limit")
        self.assertTrue((self.out / "state.json").is_file())

    def test_missing_input(self) -> None:
        done = run_tool("estimate", "--network",
                        str(WDN_PATHS.networks() / "nope.inp"),
                        "--measurements", str(THREE_NODE_MEAS),
                        "--out", str(self.out))
        self.assertEqual(done.returncode, 1)
        self.assertIn("Invalid argument", done.stderr)

    def test_compare_mismatched_networks(self) -> None:
        truth_dir, estimate_dir = self.out / "truth", self.out / "estimate"
        self.assertEqual(
            self.simulate(truth_dir, EIGHT_NODE, EIGHT_NODE_FIXED).returncode,
            0)
        self.assertEqual(self.estimate(estimate_dir).returncode, 0)
        done = run_tool("compare", str(estimate_dir / "state.json"),
                        str(truth_dir / "truth.json"))
        self.assertEqual(done.returncode, 1)

    def test_debug_describes_network(self) -> None:
        done = run_tool("--debug", "estimate", "--network", str(THREE_NODE),
                        "--measurements", str(THREE_NODE_MEAS),
                        "--max-iter", "1", "--out", str(self.out))
        self.assertEqual(done.returncode, 2, done.stderr)
        self.assertIn("1 junctions, 1 reservoirs, 1 tanks, 2 pipes, 0 pumps",
                      done.stderr)

    def test_unwritable_output(self) -> None:
        blocker = self.out / "blocker"
        blocker.write_text("", encoding="utf-8")
        done = self.estimate(blocker / "nested")
        self.assertEqual(done.returncode, 1)
        self.assertIn("Invalid argument", done.stderr)


class CsvFileTestCase(unittest.TestCase):
    def setUp(self) -> None:
        # pylint: disable-next=consider-using-with
        self.tmp = tempfile.TemporaryDirectory()
        self.blocker = pathlib.Path(self.tmp.name) / "blocker"
        self.blocker.write_text("", encoding="utf-8")

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_writers_report_os_errors(self) -> None:
        target = self.blocker / "out.csv"
        with self.assertRaises(ValueError):
            write_trace_csv(target, IterationTrace())
        with self.assertRaises(ValueError):
            write_reference_csv(target, IterationTrace())
        with self.assertRaises(ValueError):
            write_compare_csv(target, [("head:3", 1.0, 2.0)])

    def test_reader_reports_os_errors(self) -> None:
        with self.assertRaises(ValueError):
            read_csv_rows(self.blocker / "missing.csv")

    def test_header_written(self) -> None:
        target = pathlib.Path(self.tmp.name) / "compare.csv"
        write_compare_csv(target, [("head:3", 1.0, 2.5)])
        rows = read_csv_rows(target)
        self.assertEqual(rows, [{"variable": "head:3", "estimate": "1.0",
                                 "truth": "2.5", "abs_error": "1.5"}])
