from __future__ import annotations

import math
from typing import TYPE_CHECKING

import wdnse.commands
from wdnse.serialize import CompareReport, load_state_variables
from wdnse.serialize import write_compare_csv

if TYPE_CHECKING:
    from pathlib import Path
    from typing import Optional


class Command(wdnse.commands.Base):
    truth_path: Path
    out_dir: Optional[Path]

    def __init__(self, input_path: Path, truth_path: Path,
                 out_dir: Optional[Path] = None, debug: bool = False) -> None:
        self.truth_path = truth_path
        self.out_dir = out_dir
        super().__init__(input_path, debug)

    def validate(self) -> bool:
        if not self.truth_path.is_file():
            raise ValueError(
                f"Unable to read from truth file: {self.truth_path.name}")
        return super().validate()

    def execute(self) -> wdnse.commands.Result:
        estimate, _ = load_state_variables(self.input_path)
        truth, _ = load_state_variables(self.truth_path)
        if set(estimate) != set(truth):
            missing = sorted(set(estimate) ^ set(truth))
            raise ValueError(
                f"Estimate and truth name different variables: "
                f"{', '.join(missing)}")

        rows = [(name, estimate[name], truth[name]) for name in estimate]
        norm = math.sqrt(sum((e - t) ** 2 for _, e, t in rows))
        worst = max((abs(e - t) for _, e, t in rows), default=0.0)

        out_dir = self.out_dir or self.input_path.parent
        wdnse.commands.ensure_output_dir(out_dir)
        write_compare_csv(out_dir / "compare.csv", rows)
        return wdnse.commands.Result(CompareReport(len(rows), norm, worst))
