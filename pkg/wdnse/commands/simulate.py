from __future__ import annotations

from typing import TYPE_CHECKING

import wdnse.commands
from wdnse.commands import ensure_output_dir, write_json
from wdnse.misc_utils import print_debug
from wdnse.network import from_path
from wdnse.oracle import DEFAULT_STARTS, solve_hydraulics, solve_se_global
from wdnse.serialize import SimulationReport, state_report
from wdnse.state import MeasurementSet, load_measurements

if TYPE_CHECKING:
    from pathlib import Path
    from typing import Optional


class Command(wdnse.commands.Base):
    measurements_path: Optional[Path]
    out_dir: Path
    seed: Optional[int]
    starts: int

    def __init__(self, input_path: Path, measurements_path: Optional[Path],
                 out_dir: Path, seed: Optional[int] = None,
                 starts: int = DEFAULT_STARTS, debug: bool = False) -> None:
        # pylint: disable=too-many-arguments
        self.measurements_path = measurements_path
        self.out_dir = out_dir
        self.seed = seed
        self.starts = starts
        super().__init__(input_path, debug)

    def validate(self) -> bool:
        if (self.measurements_path is not None
                and not self.measurements_path.is_file()):
            raise ValueError(
                "Unable to read from measurements file: "
                f"{self.measurements_path.name}")
        if self.starts < 1:
            raise ValueError(f"Need at least one start, got {self.starts}")
        return super().validate()

    def execute(self) -> wdnse.commands.Result:
        net = from_path(self.input_path)
        print_debug(self.debug, net.describe())
        meas = (MeasurementSet() if self.measurements_path is None
                else load_measurements(self.measurements_path, net))
        ensure_output_dir(self.out_dir)

        if meas.entries:
            outcome = solve_se_global(net, meas, n_starts=self.starts,
                                      seed=self.seed, debug=self.debug)
            method = "global-estimate"
        else:
            meas.validate_against(net, 1)
            outcome = solve_hydraulics(
                net, meas.fixed_heads(net), meas.demand_matrix(net, 1)[0],
                self.debug)
            method = "hydraulics"

        base = state_report(net, outcome.state)
        report = SimulationReport(
            base.network, base.horizon, base.steps, method,
            outcome.max_equation_residual, outcome.starts_tried,
            outcome.best_objective, outcome.seed)
        result = wdnse.commands.Result(report)
        write_json(self.out_dir / "truth.json", result)
        return result
