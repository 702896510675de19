from __future__ import annotations

from abc import ABC
from contextlib import contextmanager
import csv
from dataclasses import dataclass, fields
import json
from typing import TYPE_CHECKING, Union, Sequence

import numpy as np

from wdnse.errors import DimensionError
from wdnse.state import StateVector

if TYPE_CHECKING:
    from collections.abc import Iterator
    from pathlib import Path
    from typing import Any, Optional

    from wdnse.estimator import IterationTrace
    from wdnse.network import Network


@dataclass
class ReportBase(ABC):
    pass


JSONAble = Union[
    ReportBase, Sequence[ReportBase], dict[str, "JSONAble"], str, int,
    float, bool, None]


@dataclass
class StepReport(ReportBase):
    step: int
    heads_ft: dict[str, float]
    flows_gpm: dict[str, float]


@dataclass
class StateReport(ReportBase):
    network: str
    horizon: int
    steps: list[StepReport]


@dataclass
class SimulationReport(StateReport):
    method: str
    max_equation_residual: float
    starts_tried: int
    best_objective: float
    seed: Optional[int] = None


@dataclass
class EstimateReport(ReportBase):
    status: str
    iterations: int
    final_error: float
    objective: float
    wall_time_s: float
    manifest: ReportBase


@dataclass
class CompareReport(ReportBase):
    variables: int
    norm: float
    max_abs_error: float


def report_field_name(field_name: str) -> str:
    return field_name.replace("_", " ")


def to_jsonable(data: JSONAble) -> Any:
    if isinstance(data, list):
        return [to_jsonable(x) for x in data if x is not None]

    # Plain dicts carry ids as keys, which stay as they are.
    if isinstance(data, dict):
        return {k: to_jsonable(v) for k, v in data.items() if v is not None}

    if isinstance(data, ReportBase):
        jsonable_map = {}
        for field in fields(data):
            field_name = field.name
            value = getattr(data, field_name)
            if value is None:
                continue
            report_name = report_field_name(field_name)
            jsonable_map[report_name] = to_jsonable(value)
        return jsonable_map

    if isinstance(data, np.generic):
        return data.item()

    return data


def state_report(net: Network, state: StateVector,
                 name: str = "") -> StateReport:
    steps = []
    for k in range(state.horizon):
        heads, flows = state.node_heads(k), state.link_flows(k)
        steps.append(StepReport(
            k,
            {node_id: float(heads[i]) for node_id, i in
             net.node_index.items()},
            {link_id: float(flows[i]) for link_id, i in
             net.link_index.items()}))
    return StateReport(name or net.options.title, state.horizon, steps)


def variable_name(kind: str, element_id: str, step: int,
                  horizon: int) -> str:
    if horizon == 1:
        return f"{kind}:{element_id}"
    return f"{kind}:{element_id}@{step}"


def state_variables(report: Any) -> dict[str, float]:
    """Flattens a serialized state report into named values."""
    try:
        steps = report["steps"]
        horizon = int(report["horizon"])
        variables: dict[str, float] = {}
        for entry in steps:
            step = int(entry["step"])
            for node_id, value in entry["heads ft"].items():
                variables[variable_name("head", node_id, step, horizon)] = (
                    float(value))
            for link_id, value in entry["flows gpm"].items():
                variables[variable_name("flow", link_id, step, horizon)] = (
                    float(value))
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise ValueError(f"Malformed state report: {exc}") from exc
    return variables


def load_state_variables(path: Path) -> tuple[dict[str, float], int]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"Unable to read state file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"Invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict) or "report" not in data:
        raise ValueError(f"{path} does not hold a tool report")
    report = data["report"]
    return state_variables(report), int(report.get("horizon", 1))


def state_from_variables(net: Network, variables: dict[str, float],
                         horizon: int) -> StateVector:
    width = net.node_count() + net.link_count()
    x = np.zeros(width * horizon)
    try:
        for k in range(horizon):
            for node_id, i in net.node_index.items():
                x[k * width + i] = variables[
                    variable_name("head", node_id, k, horizon)]
            for link_id, i in net.link_index.items():
                x[k * width + net.node_count() + i] = variables[
                    variable_name("flow", link_id, k, horizon)]
    except KeyError as exc:
        raise DimensionError(
            f"State file has no value for {exc.args[0]}") from exc
    return StateVector.from_vector(net, x, horizon)


@contextmanager
def csv_writer(path: Path, header: list[str]) -> Iterator[Any]:
    try:
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            yield writer
    except OSError as exc:
        raise ValueError(f"Unable to write {path}") from exc


def write_trace_csv(path: Path, trace: IterationTrace) -> None:
    with csv_writer(path, ["n", "error", "objective",
                           "accelerated"]) as writer:
        for record in trace.records:
            writer.writerow([record.n, repr(record.error),
                             repr(record.objective),
                             "true" if record.accelerated else "false"])


def write_reference_csv(path: Path, trace: IterationTrace) -> None:
    with csv_writer(path, ["n", "reference_error"]) as writer:
        for record in trace.records:
            writer.writerow([record.n, repr(record.reference_error)])


def write_compare_csv(path: Path, rows: list[tuple[str, float, float]]
                      ) -> None:
    with csv_writer(path, ["variable", "estimate", "truth",
                           "abs_error"]) as writer:
        for name, estimate, truth in rows:
            writer.writerow([name, repr(estimate), repr(truth),
                             repr(abs(estimate - truth))])


def read_csv_rows(path: Path) -> list[dict[str, str]]:
    try:
        with path.open(encoding="utf-8", newline="") as handle:
            return list(csv.DictReader(handle))
    except OSError as exc:
        raise ValueError(f"Unable to read {path}") from exc

