from __future__ import annotations

import time
from typing import TYPE_CHECKING

import wdnse.commands
from wdnse.commands import RunManifest, ensure_output_dir, write_json
from wdnse.estimator import EstimatorConfig, SuccessiveEstimator
from wdnse.estimator import default_initial_state
from wdnse.linearization import GpConfig
from wdnse.misc_utils import print_debug
from wdnse.network import from_path
from wdnse.serialize import EstimateReport, load_state_variables
from wdnse.serialize import state_from_variables, state_report
from wdnse.serialize import write_reference_csv, write_trace_csv
from wdnse.state import load_measurements
from wdnse.types import ObjectiveKind

if TYPE_CHECKING:
    from pathlib import Path
    from typing import Optional


class Command(wdnse.commands.Base):
    # pylint: disable=too-many-instance-attributes
    measurements_path: Path
    out_dir: Path
    cfg: EstimatorConfig
    truth_path: Optional[Path]

    def __init__(self, input_path: Path, measurements_path: Path,
                 out_dir: Path, cfg: EstimatorConfig,
                 truth_path: Optional[Path] = None,
                 debug: bool = False) -> None:
        # pylint: disable=too-many-arguments
        self.measurements_path = measurements_path
        self.out_dir = out_dir
        self.cfg = cfg
        self.truth_path = truth_path
        super().__init__(input_path, debug)

    @staticmethod
    def config_from_args(threshold: float, max_iter: int, step: int,
                         accel: float, base: float, objective: str,
                         horizon: int) -> EstimatorConfig:
        # pylint: disable=too-many-arguments
        return EstimatorConfig(
            gp=GpConfig(base), threshold=threshold, max_iterations=max_iter,
            acceleration_period=step, acceleration_gain=accel,
            objective_kind=ObjectiveKind(objective), horizon=horizon)

    def validate(self) -> bool:
        if not self.measurements_path.is_file():
            raise ValueError(
                "Unable to read from measurements file: "
                f"{self.measurements_path.name}")
        if self.truth_path is not None and not self.truth_path.is_file():
            raise ValueError(
                f"Unable to read from truth file: {self.truth_path.name}")
        return super().validate()

    def manifest(self) -> RunManifest:
        cfg = self.cfg
        overrides = {
            "threshold": repr(cfg.threshold),
            "max_iter": str(cfg.max_iterations),
            "step": str(cfg.acceleration_period),
            "accel": repr(cfg.acceleration_gain),
            "base": repr(cfg.gp.base),
            "objective": cfg.objective_kind.value,
            "horizon": str(cfg.horizon),
        }
        return RunManifest(str(self.input_path), str(self.measurements_path),
                           str(self.out_dir), overrides)

    def execute(self) -> wdnse.commands.Result:
        net = from_path(self.input_path)
        print_debug(self.debug, net.describe())
        meas = load_measurements(self.measurements_path, net)
        ensure_output_dir(self.out_dir)

        reference = None
        if self.truth_path is not None:
            variables, horizon = load_state_variables(self.truth_path)
            if horizon != self.cfg.horizon:
                raise ValueError(
                    f"Truth file covers {horizon} steps, horizon is "
                    f"{self.cfg.horizon}")
            reference = state_from_variables(net, variables, horizon)

        started = time.perf_counter()
        estimator = SuccessiveEstimator(net, meas, self.cfg, self.debug)
        initial = default_initial_state(net, meas, self.cfg.horizon)
        state, trace = estimator.run(initial, reference)
        wall_time = time.perf_counter() - started

        write_json(self.out_dir / "state.json",
                   wdnse.commands.Result(state_report(net, state)))
        write_trace_csv(self.out_dir / "trace.csv", trace)
        if reference is not None:
            write_reference_csv(self.out_dir / "reference.csv", trace)

        last = trace.records[-1] if trace.records else None
        report = EstimateReport(
            trace.status.value, trace.iterations, trace.final_error(),
            last.objective if last else float("nan"), wall_time,
            self.manifest())
        result = wdnse.commands.Result(
            report, (wdnse.commands.EXIT_OK if trace.converged
                     else wdnse.commands.EXIT_ITERATION_LIMIT))
        write_json(self.out_dir / "report.json", result)
        return result
