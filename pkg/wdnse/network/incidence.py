from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import networkx as NWX
import numpy as np

from wdnse.errors import NetworkValidationError
from wdnse.hydraulics import GPM_TO_CFS

if TYPE_CHECKING:
    from collections.abc import Sequence
    from typing import Optional

    from wdnse.network import Network
    from wdnse.types import FloatArray, LinkId, NodeId, SensorPair


@dataclass(frozen=True, eq=False)
class IncidenceOperators:
    # |J| x |E|: +1 where the link flows into the junction, -1 out of it.
    mass_matrix: FloatArray
    # |T| x |E|: signed like mass_matrix, scaled by dt·GPM_TO_CFS/area so a
    # row times the flows is the head change over one step.
    tank_matrix: FloatArray
    # n_e x |E|: signed links of one path from sensor node i to node j.
    measurement_matrix: FloatArray
    sensors: tuple[SensorPair, ...]
    paths: tuple[tuple[LinkId, ...], ...]
    dt: float


def signed_incidence(net: Network, node_ids: Sequence[NodeId]) -> FloatArray:
    rows = {node_id: i for i, node_id in enumerate(node_ids)}
    matrix = np.zeros((len(node_ids), net.link_count()))
    for link in net.links():
        col = net.link_index[link.id]
        if link.to_node in rows:
            matrix[rows[link.to_node], col] += 1.0
        if link.from_node in rows:
            matrix[rows[link.from_node], col] -= 1.0
    return matrix


def sensor_path(net: Network, graph: NWX.MultiGraph, source: NodeId,
                target: NodeId) -> list[tuple[LinkId, float]]:
    """Shortest path from source to target, as (link id, sign) pairs. Among
    shortest paths, the one whose link id sequence sorts first wins."""
    distance = NWX.single_source_shortest_path_length(graph, target)
    if source not in distance:
        raise NetworkValidationError(
            f"No path between sensor nodes {source} and {target}")
    path: list[tuple[LinkId, float]] = []
    current = source
    while current != target:
        step_to = distance[current] - 1
        for link in net.links_at(current):
            other = (link.to_node if link.from_node == current
                     else link.from_node)
            if distance.get(other) == step_to:
                sign = 1.0 if link.from_node == current else -1.0
                path.append((link.id, sign))
                current = other
                break
    return path


def build_incidence(net: Network, sensors: Sequence[SensorPair],
                    dt: Optional[float] = None) -> IncidenceOperators:
    step = net.options.hydraulic_step if dt is None else dt
    if not step > 0:
        raise NetworkValidationError(f"Time step must be positive: {step}")

    mass = signed_incidence(net, [j.id for j in net.junctions])
    tank = signed_incidence(net, [t.id for t in net.tanks])
    for row, node in enumerate(net.tanks):
        tank[row, :] *= step * GPM_TO_CFS / node.area

    graph = net.undirected()
    measurement = np.zeros((len(sensors), net.link_count()))
    paths = []
    for row, (source, target) in enumerate(sensors):
        for node_id in (source, target):
            if not net.has_node(node_id):
                raise NetworkValidationError(
                    f"Sensor references unknown node {node_id}")
        if source == target:
            raise NetworkValidationError(
                f"Sensor pair uses node {source} twice")
        path = sensor_path(net, graph, source, target)
        for link_id, sign in path:
            measurement[row, net.link_index[link_id]] += sign
        paths.append(tuple(link_id for link_id, _ in path))

    for matrix in (mass, tank, measurement):
        matrix.setflags(write=False)
    return IncidenceOperators(mass, tank, measurement, tuple(sensors),
                              tuple(paths), step)
