from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import networkx as NWX

from wdnse.errors import NetworkValidationError
from wdnse.types import HeadLossFormula

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path
    from typing import Optional, Union

    from wdnse.network.link import Link, Pipe, Pump
    from wdnse.network.node import Junction, Node, Reservoir, Tank
    from wdnse.types import LinkId, NodeId


DEFAULT_HYDRAULIC_STEP = 3600.0


@dataclass(frozen=True)
class NetworkOptions:
    title: str = ""
    formula: HeadLossFormula = HeadLossFormula.HAZEN_WILLIAMS
    hydraulic_step: float = DEFAULT_HYDRAULIC_STEP
    duration: float = 0.0


class Network:
    """Water distribution network: junctions, reservoirs and tanks joined by
    pipes and pumps. Immutable once built.

    Nodes are densely indexed junctions first, then reservoirs, then tanks;
    links are pipes first, then pumps. Both follow file order inside each
    group, and every vector in the package uses these indexes."""

    junctions: tuple[Junction, ...]
    reservoirs: tuple[Reservoir, ...]
    tanks: tuple[Tank, ...]
    pipes: tuple[Pipe, ...]
    pumps: tuple[Pump, ...]
    options: NetworkOptions

    node_index: dict[NodeId, int]
    link_index: dict[LinkId, int]

    # Directed multigraph with node ids as nodes and link ids as edge keys.
    graph: NWX.MultiDiGraph

    _nodes: dict[NodeId, Node]
    _links: dict[LinkId, Link]
    _junction_rows: dict[NodeId, int]

    def __init__(self, junctions: Sequence[Junction],
                 reservoirs: Sequence[Reservoir], tanks: Sequence[Tank],
                 pipes: Sequence[Pipe], pumps: Sequence[Pump],
                 options: Optional[NetworkOptions] = None) -> None:
        self.junctions = tuple(junctions)
        self.reservoirs = tuple(reservoirs)
        self.tanks = tuple(tanks)
        self.pipes = tuple(pipes)
        self.pumps = tuple(pumps)
        self.options = options or NetworkOptions()
        self.build_caches()
        self.validate()

    def build_caches(self) -> None:
        self._nodes = {}
        for node in self.nodes():
            if node.id in self._nodes:
                raise NetworkValidationError(f"Duplicate node id: {node.id}")
            self._nodes[node.id] = node
        self._links = {}
        for link in self.links():
            if link.id in self._links:
                raise NetworkValidationError(f"Duplicate link id: {link.id}")
            self._links[link.id] = link

        self.node_index = {n.id: i for i, n in enumerate(self.nodes())}
        self.link_index = {l.id: i for i, l in enumerate(self.links())}
        self._junction_rows = {j.id: i for i, j in enumerate(self.junctions)}

        self.graph = NWX.MultiDiGraph()
        for node in self.nodes():
            self.graph.add_node(node.id)
        for link in self.links():
            self.graph.add_edge(link.from_node, link.to_node, key=link.id)

    def validate(self) -> bool:
        for node in self.nodes():
            node.validate()
        for link in self.links():
            if link.from_node not in self._nodes:
                raise NetworkValidationError(
                    f"Link {link.id} references unknown node "
                    f"{link.from_node}")
            if link.to_node not in self._nodes:
                raise NetworkValidationError(
                    f"Link {link.id} references unknown node {link.to_node}")
            if link.from_node == link.to_node:
                raise NetworkValidationError(
                    f"Link {link.id} starts and ends at {link.from_node}")
            link.validate()
        if len(self.reservoirs) + len(self.tanks) == 0:
            raise NetworkValidationError(
                "Network needs at least one reservoir or tank as a head "
                "reference")
        # Dangling references above add phantom nodes to the graph, so
        # connectivity is only checked on a well-formed graph.
        if not NWX.is_weakly_connected(self.graph):
            parts = sorted(
                sorted(c) for c in NWX.weakly_connected_components(self.graph))
            raise NetworkValidationError(
                f"Network is disconnected, components: {parts}")
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (self.junctions == other.junctions
                and self.reservoirs == other.reservoirs
                and self.tanks == other.tanks
                and self.pipes == other.pipes
                and self.pumps == other.pumps
                and self.options == other.options)

    def __hash__(self) -> int:
        return hash((self.junctions, self.reservoirs, self.tanks,
                     self.pipes, self.pumps, self.options))

    def nodes(self) -> Iterable[Node]:
        yield from self.junctions
        yield from self.reservoirs
        yield from self.tanks

    def links(self) -> Iterable[Link]:
        yield from self.pipes
        yield from self.pumps

    def node(self, node_id: NodeId) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError as exc:
            raise NetworkValidationError(
                f"Unknown node id: {node_id}") from exc

    def link(self, link_id: LinkId) -> Link:
        try:
            return self._links[link_id]
        except KeyError as exc:
            raise NetworkValidationError(
                f"Unknown link id: {link_id}") from exc

    def has_node(self, node_id: NodeId) -> bool:
        return node_id in self._nodes

    def node_count(self) -> int:
        return len(self._nodes)

    def link_count(self) -> int:
        return len(self._links)

    def node_ids(self) -> list[NodeId]:
        return [n.id for n in self.nodes()]

    def link_ids(self) -> list[LinkId]:
        return [l.id for l in self.links()]

    def junction_row(self, node_id: NodeId) -> Optional[int]:
        """Row of a junction among junctions, None for other nodes."""
        return self._junction_rows.get(node_id)

    def undirected(self) -> NWX.MultiGraph:
        return self.graph.to_undirected(as_view=True)

    def links_at(self, node_id: NodeId) -> list[Link]:
        """Links touching a node, ordered by link id."""
        ids = set()
        for _, _, key in self.graph.in_edges(node_id, keys=True):
            ids.add(key)
        for _, _, key in self.graph.out_edges(node_id, keys=True):
            ids.add(key)
        return [self._links[i] for i in sorted(ids)]

    def describe(self) -> str:
        return (f"network '{self.options.title}': "
                f"{len(self.junctions)} junctions, "
                f"{len(self.reservoirs)} reservoirs, {len(self.tanks)} tanks, "
                f"{len(self.pipes)} pipes, {len(self.pumps)} pumps")


def from_path(input_path: Union[str, Path]) -> Network:
    # pylint: disable=import-outside-toplevel
    from wdnse.inp import load_from_path
    return load_from_path(input_path)
