from __future__ import annotations

from abc import ABC
from dataclasses import dataclass, field
import json
from typing import TYPE_CHECKING

from wdnse import __version__
from wdnse.serialize import ReportBase, to_jsonable

if TYPE_CHECKING:
    from pathlib import Path
    from typing import Optional, Union, Sequence


EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_ITERATION_LIMIT = 2


# pylint: disable=too-few-public-methods
class Result:
    tool_version: str
    report: Union[ReportBase, Sequence[ReportBase]]
    exit_code: int

    def __init__(self, report: Union[ReportBase, Sequence[ReportBase]],
                 exit_code: int = EXIT_OK) -> None:
        self.tool_version = str(__version__)
        self.report = report
        self.exit_code = exit_code

    def to_json(self) -> str:
        data = {
            "meta": {
                "versions": {
                    "tool": self.tool_version,
                },
            },
            "report": to_jsonable(self.report)
        }
        return json.dumps(data)


@dataclass
class RunManifest(ReportBase):
    network: str
    measurements: Optional[str]
    out: str
    overrides: dict[str, str] = field(default_factory=dict)


def ensure_output_dir(out_dir: Path) -> None:
    if out_dir.exists() and not out_dir.is_dir():
        raise ValueError(f"Output path is not a directory: {out_dir}")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValueError(
            f"Unable to create output directory: {out_dir}") from exc


def write_json(path: Path, result: Result) -> None:
    try:
        path.write_text(result.to_json() + "\n", encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"Unable to write {path}") from exc


class Base(ABC):
    input_path: Path
    debug: bool

    def __init__(self, input_path: Path, debug: bool = False) -> None:
        self.input_path = input_path
        self.debug = debug

    def validate(self) -> bool:
        if not self.input_path.is_file():
            raise ValueError(
                f"Unable to read from input file: {self.input_path.name}")
        return True

    def execute(self) -> Result:
        raise NotImplementedError()

    def format(self, result: Result) -> Optional[str]:
        return result.to_json()
