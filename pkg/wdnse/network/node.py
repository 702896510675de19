from __future__ import annotations

from abc import ABC
from dataclasses import dataclass
from enum import Enum
import math
from typing import TYPE_CHECKING

from wdnse.network.element import NetworkElement

if TYPE_CHECKING:
    from typing import Optional

    from wdnse.types import Bounds, NodeId


# Default pressure head window above elevation, in ft.
DEFAULT_PRESSURE_RANGE = 500.0


@dataclass(frozen=True)
class Node(NetworkElement, ABC):
    id: NodeId

    class Types(Enum):
        JUNCTION = "junction"
        RESERVOIR = "reservoir"
        TANK = "tank"

    def node_type(self) -> Node.Types:
        raise NotImplementedError()

    def is_junction(self) -> bool:
        return self.node_type() == Node.Types.JUNCTION

    def as_junction_node(self) -> Optional[Junction]:
        return None

    def as_reservoir_node(self) -> Optional[Reservoir]:
        return None

    def as_tank_node(self) -> Optional[Tank]:
        return None

    def reference_head(self) -> float:
        """Head used to initialize estimation and simulation."""
        raise NotImplementedError()

    def bounds(self) -> Bounds:
        raise NotImplementedError()

    def describe(self) -> str:
        return f"node {self.id} ({self.node_type().value})"


@dataclass(frozen=True)
class Junction(Node):
    elevation: float
    demand: float
    head_bounds: Optional[Bounds] = None

    def node_type(self) -> Node.Types:
        return Node.Types.JUNCTION

    def as_junction_node(self) -> Optional[Junction]:
        return self

    def reference_head(self) -> float:
        return self.elevation

    def bounds(self) -> Bounds:
        if self.head_bounds is not None:
            return self.head_bounds
        return (self.elevation, self.elevation + DEFAULT_PRESSURE_RANGE)

    def validate(self) -> bool:
        if not math.isfinite(self.demand):
            self.throw(f"Junction {self.id} has a non-finite demand")
        h_min, h_max = self.bounds()
        if h_min > h_max:
            self.throw(f"Junction {self.id} has empty head bounds "
                       f"[{h_min}, {h_max}]")
        return True


@dataclass(frozen=True)
class Reservoir(Node):
    head: float

    def node_type(self) -> Node.Types:
        return Node.Types.RESERVOIR

    def as_reservoir_node(self) -> Optional[Reservoir]:
        return self

    def reference_head(self) -> float:
        return self.head

    def bounds(self) -> Bounds:
        return (self.head, self.head)

    def validate(self) -> bool:
        if not math.isfinite(self.head):
            self.throw(f"Reservoir {self.id} has a non-finite head")
        return True


@dataclass(frozen=True)
class Tank(Node):
    elevation: float
    initial_level: float
    min_level: float
    max_level: float
    diameter: float

    def node_type(self) -> Node.Types:
        return Node.Types.TANK

    def as_tank_node(self) -> Optional[Tank]:
        return self

    @property
    def area(self) -> float:
        """Cross-sectional area in ft², from the diameter in ft."""
        return math.pi * self.diameter ** 2 / 4.0

    @property
    def initial_head(self) -> float:
        return self.elevation + self.initial_level

    def reference_head(self) -> float:
        return self.initial_head

    def bounds(self) -> Bounds:
        return (self.elevation + self.min_level,
                self.elevation + self.max_level)

    def validate(self) -> bool:
        if not self.diameter > 0:
            self.throw(f"Tank {self.id} must have a positive diameter")
        h_min, h_max = self.bounds()
        if not h_min <= self.initial_head <= h_max:
            self.throw(f"Tank {self.id} initial head {self.initial_head} is "
                       f"outside [{h_min}, {h_max}]")
        return True
