"""State vectors and head-difference measurements."""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from wdnse.errors import DimensionError, NetworkValidationError

if TYPE_CHECKING:
    from typing import Any, Optional, Union

    from wdnse.network import Network
    from wdnse.types import FloatArray, LinkId, NodeId, SensorPair


@dataclass(eq=False)
class StateVector:
    """All heads [ft] and flows [GPM] of a network, one row per time step."""
    junction_heads: FloatArray
    reservoir_heads: FloatArray
    tank_heads: FloatArray
    pipe_flows: FloatArray
    pump_flows: FloatArray

    def __post_init__(self) -> None:
        arrays = self.blocks()
        horizon = arrays[0].shape[0] if arrays[0].ndim == 2 else -1
        for array in arrays:
            if array.ndim != 2 or array.shape[0] != horizon:
                raise DimensionError(
                    "State blocks must be 2-D arrays with one row per step")
        if horizon < 1:
            raise DimensionError("State needs at least one time step")

    def blocks(self) -> list[FloatArray]:
        return [self.junction_heads, self.reservoir_heads, self.tank_heads,
                self.pipe_flows, self.pump_flows]

    @property
    def horizon(self) -> int:
        return int(self.junction_heads.shape[0])

    def node_count(self) -> int:
        return sum(b.shape[1] for b in self.blocks()[:3])

    def link_count(self) -> int:
        return sum(b.shape[1] for b in self.blocks()[3:])

    def step_size(self) -> int:
        return self.node_count() + self.link_count()

    def node_heads(self, step: int = 0) -> FloatArray:
        """Heads of all nodes at a step, in network node-index order."""
        return np.concatenate([self.junction_heads[step],
                               self.reservoir_heads[step],
                               self.tank_heads[step]])

    def link_flows(self, step: int = 0) -> FloatArray:
        return np.concatenate([self.pipe_flows[step], self.pump_flows[step]])

    def head(self, net: Network, node_id: NodeId, step: int = 0) -> float:
        return float(self.node_heads(step)[net.node_index[node_id]])

    def flow(self, net: Network, link_id: LinkId, step: int = 0) -> float:
        return float(self.link_flows(step)[net.link_index[link_id]])

    def to_vector(self) -> FloatArray:
        """Flattens to [h^J, h^R, h^TK, q^P, q^M] per step, steps stacked."""
        return np.concatenate([
            np.concatenate([self.node_heads(k), self.link_flows(k)])
            for k in range(self.horizon)])

    def copy(self) -> StateVector:
        return StateVector(*[b.copy() for b in self.blocks()])

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(b))) for b in self.blocks())

    @staticmethod
    def from_vector(net: Network, x: FloatArray,
                    horizon: int = 1) -> StateVector:
        n_nodes, n_links = net.node_count(), net.link_count()
        width = n_nodes + n_links
        if x.shape != (width * horizon,):
            raise DimensionError(
                f"Expected a state vector of length {width * horizon}, got "
                f"{x.shape}")
        rows = np.asarray(x, dtype=float).reshape(horizon, width)
        n_j, n_r = len(net.junctions), len(net.reservoirs)
        n_p = len(net.pipes)
        return StateVector(
            rows[:, :n_j].copy(),
            rows[:, n_j:n_j + n_r].copy(),
            rows[:, n_j + n_r:n_nodes].copy(),
            rows[:, n_nodes:n_nodes + n_p].copy(),
            rows[:, n_nodes + n_p:].copy())

    @staticmethod
    def from_values(net: Network, heads: dict[NodeId, float],
                    flows: dict[LinkId, float]) -> StateVector:
        """Single-step state from id-keyed heads and flows."""
        x = np.zeros(net.node_count() + net.link_count())
        for node_id, index in net.node_index.items():
            x[index] = heads[node_id]
        offset = net.node_count()
        for link_id, index in net.link_index.items():
            x[offset + index] = flows[link_id]
        return StateVector.from_vector(net, x)

    def check_matches(self, net: Network) -> None:
        expected = [len(net.junctions), len(net.reservoirs), len(net.tanks),
                    len(net.pipes), len(net.pumps)]
        actual = [b.shape[1] for b in self.blocks()]
        if expected != actual:
            raise DimensionError(
                f"State block sizes {actual} do not match network {expected}")


@dataclass(frozen=True)
class Measurement:
    from_node: NodeId
    to_node: NodeId
    value: float
    weight: float
    step: int = 0

    def pair(self) -> SensorPair:
        return (self.from_node, self.to_node)


@dataclass
class MeasurementSet:
    """Head differences h_i - h_j [ft] with weights (larger is more
    trusted), plus tank and reservoir heads treated as exact."""
    entries: list[Measurement] = field(default_factory=list)
    fixed: dict[NodeId, float] = field(default_factory=dict)
    # Per-step junction demands [GPM] replacing the network base demand.
    demands: dict[NodeId, list[float]] = field(default_factory=dict)
    # Historical average flows [GPM] used to start the iteration.
    initial_flows: dict[LinkId, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: set[tuple[NodeId, NodeId, int]] = set()
        for entry in self.entries:
            if not (entry.weight > 0 and math.isfinite(entry.weight)):
                raise ValueError(
                    f"Measurement {entry.from_node}->{entry.to_node} needs a "
                    f"positive weight, got {entry.weight}")
            if not math.isfinite(entry.value):
                raise ValueError(
                    f"Measurement {entry.from_node}->{entry.to_node} has a "
                    "non-finite value")
            if entry.step < 0:
                raise ValueError(
                    f"Measurement step must be non-negative: {entry.step}")
            key = (entry.from_node, entry.to_node, entry.step)
            reverse = (entry.to_node, entry.from_node, entry.step)
            if key in seen or reverse in seen:
                raise ValueError(
                    f"Duplicate measurement between {entry.from_node} and "
                    f"{entry.to_node} at step {entry.step}")
            seen.add(key)

    def sensors(self) -> list[SensorPair]:
        """Distinct node pairs, in first-seen order."""
        pairs: list[SensorPair] = []
        for entry in self.entries:
            if entry.pair() not in pairs:
                pairs.append(entry.pair())
        return pairs

    def weights(self) -> FloatArray:
        return np.array([e.weight for e in self.entries], dtype=float)

    def values(self) -> FloatArray:
        return np.array([e.value for e in self.entries], dtype=float)

    def scaled(self, factor: float) -> MeasurementSet:
        entries = [Measurement(e.from_node, e.to_node, e.value,
                               e.weight * factor, e.step)
                   for e in self.entries]
        return MeasurementSet(entries, dict(self.fixed), dict(self.demands),
                              dict(self.initial_flows))

    def validate_against(self, net: Network, horizon: int = 1) -> bool:
        for entry in self.entries:
            for node_id in entry.pair():
                if not net.has_node(node_id):
                    raise NetworkValidationError(
                        f"Measurement references unknown node {node_id}")
            if entry.step >= horizon:
                raise NetworkValidationError(
                    f"Measurement {entry.from_node}->{entry.to_node} is at "
                    f"step {entry.step}, horizon is {horizon}")
        for node_id in self.fixed:
            node = net.node(node_id)
            if node.is_junction():
                raise NetworkValidationError(
                    f"Only tank and reservoir heads can be fixed, not "
                    f"junction {node_id}")
        for node_id, values in self.demands.items():
            if net.junction_row(node_id) is None:
                raise NetworkValidationError(
                    f"Demand given for {node_id}, which is not a junction")
            if len(values) < horizon:
                raise NetworkValidationError(
                    f"Junction {node_id} has {len(values)} demands, horizon "
                    f"is {horizon}")
        for link_id in self.initial_flows:
            net.link(link_id)
        return True

    def demand_matrix(self, net: Network, horizon: int) -> FloatArray:
        """Junction demands, one row per step."""
        base = np.array([j.demand for j in net.junctions], dtype=float)
        matrix = np.tile(base, (horizon, 1))
        for node_id, values in self.demands.items():
            row = net.junction_row(node_id)
            if row is not None:
                matrix[:, row] = values[:horizon]
        return matrix

    def fixed_heads(self, net: Network) -> dict[NodeId, float]:
        """Reservoir heads from the network, overridden by fixed values,
        plus any fixed tank heads."""
        heads = {r.id: r.head for r in net.reservoirs}
        heads.update(self.fixed)
        return heads


def parse_measurement(raw: Any) -> Measurement:
    try:
        return Measurement(str(raw["from"]), str(raw["to"]),
                           float(raw["value_ft"]),
                           float(raw.get("weight", 1.0)),
                           int(raw.get("step", 0)))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"Malformed measurement entry: {raw}") from exc


def parse_measurements(data: Any) -> MeasurementSet:
    if isinstance(data, list):
        return MeasurementSet([parse_measurement(m) for m in data])
    if not isinstance(data, dict):
        raise ValueError("Measurements must be a JSON array or object")
    try:
        entries = [parse_measurement(m) for m in data.get("measurements", [])]
        fixed = {str(k): float(v) for k, v in data.get("fixed", {}).items()}
        demands = {str(k): [float(x) for x in v]
                   for k, v in data.get("demands", {}).items()}
        initial = {str(k): float(v)
                   for k, v in data.get("initial_flows", {}).items()}
    except (TypeError, AttributeError) as exc:
        raise ValueError(f"Malformed measurements document: {exc}") from exc
    return MeasurementSet(entries, fixed, demands, initial)


def load_measurements(input_path: Union[str, Path],
                      net: Optional[Network] = None) -> MeasurementSet:
    path = Path(input_path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(
            f"Unable to read measurements file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"Invalid JSON in {path}: {exc}") from exc
    meas = parse_measurements(data)
    if net is not None:
        for node_id in meas.fixed:
            net.node(node_id)
    return meas
