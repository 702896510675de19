from __future__ import annotations

from abc import ABC
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
import math
from typing import TYPE_CHECKING

from wdnse.errors import UnsupportedFeatureError
from wdnse.hydraulics import chezy_manning_resistance
from wdnse.hydraulics import darcy_weisbach_resistance
from wdnse.hydraulics import hazen_williams_resistance
from wdnse.hydraulics import HeadLossModel, PumpCurve
from wdnse.network.element import NetworkElement
from wdnse.types import HeadLossFormula

if TYPE_CHECKING:
    from typing import Optional

    from wdnse.types import Bounds, LinkId, NodeId


DEFAULT_FLOW_BOUNDS: Bounds = (-1e4, 1e4)
DEFAULT_PUMP_FLOW_BOUNDS: Bounds = (0.0, 1e4)

CurvePoints = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Link(NetworkElement, ABC):
    id: LinkId
    from_node: NodeId
    to_node: NodeId

    class Types(Enum):
        PIPE = "pipe"
        PUMP = "pump"

    def link_type(self) -> Link.Types:
        raise NotImplementedError()

    def as_pipe_link(self) -> Optional[Pipe]:
        return None

    def as_pump_link(self) -> Optional[Pump]:
        return None

    def bounds(self) -> Bounds:
        raise NotImplementedError()

    def describe(self) -> str:
        return (f"link {self.id} ({self.link_type().value}) "
                f"{self.from_node} -> {self.to_node}")


@dataclass(frozen=True)
class Pipe(Link):
    length: float
    diameter: float
    roughness: float
    formula: HeadLossFormula = HeadLossFormula.HAZEN_WILLIAMS
    flow_bounds: Optional[Bounds] = None

    def link_type(self) -> Link.Types:
        return Link.Types.PIPE

    def as_pipe_link(self) -> Optional[Pipe]:
        return self

    @property
    def flow_exponent(self) -> float:
        if self.formula == HeadLossFormula.HAZEN_WILLIAMS:
            return 1.852
        return 2.0

    @cached_property
    def resistance(self) -> float:
        match self.formula:
            case HeadLossFormula.HAZEN_WILLIAMS:
                return hazen_williams_resistance(
                    self.length, self.diameter, self.roughness)
            case HeadLossFormula.DARCY_WEISBACH:
                return darcy_weisbach_resistance(
                    self.length, self.diameter, self.roughness)
            case HeadLossFormula.CHEZY_MANNING:
                return chezy_manning_resistance(
                    self.length, self.diameter, self.roughness)
        raise UnsupportedFeatureError(
            f"Unknown head loss formula: {self.formula}")

    def headloss_model(self) -> HeadLossModel:
        return HeadLossModel(self.resistance, self.flow_exponent)

    def bounds(self) -> Bounds:
        return self.flow_bounds or DEFAULT_FLOW_BOUNDS

    def validate(self) -> bool:
        if not self.length > 0 or not self.diameter > 0:
            self.throw(f"Pipe {self.id} needs positive length and diameter")
        if not self.roughness > 0:
            self.throw(f"Pipe {self.id} needs a positive roughness")
        if not (self.resistance > 0 and math.isfinite(self.resistance)):
            self.throw(f"Pipe {self.id} has invalid resistance "
                       f"{self.resistance}")
        q_min, q_max = self.bounds()
        if q_min > q_max:
            self.throw(f"Pipe {self.id} has empty flow bounds")
        return True


def expand_curve(points: CurvePoints) -> PumpCurve:
    """Turns the points of an EPANET pump curve into (h0, r, ν) of
    h = h0 - r·q^ν. One point is a design point; three points start at
    shutoff and are fitted exactly."""
    if len(points) == 1:
        q_design, h_design = points[0]
        shutoff = 1.33334 * h_design
        points = ((0.0, shutoff), (q_design, h_design),
                  (2.0 * q_design, 0.0))
    if len(points) != 3 or points[0][0] != 0.0:
        raise UnsupportedFeatureError(
            f"Pump curves must have one point or three points starting at "
            f"zero flow, got {len(points)} points")
    (_, h0), (q1, h1), (q2, h2) = points
    if not 0 < q1 < q2 or not h0 > h1 > h2:
        raise UnsupportedFeatureError(
            f"Pump curve points are not monotone: {points}")
    exponent = math.log((h0 - h1) / (h0 - h2)) / math.log(q1 / q2)
    coefficient = (h0 - h1) / q1 ** exponent
    return PumpCurve(h0, coefficient, exponent)


@dataclass(frozen=True)
class Pump(Link):
    curve_id: str
    curve_points: CurvePoints
    flow_bounds: Optional[Bounds] = None

    def link_type(self) -> Link.Types:
        return Link.Types.PUMP

    def as_pump_link(self) -> Optional[Pump]:
        return self

    @cached_property
    def curve(self) -> PumpCurve:
        return expand_curve(self.curve_points)

    @property
    def shutoff_head(self) -> float:
        return self.curve.shutoff_head

    @property
    def curve_coefficient(self) -> float:
        return self.curve.coefficient

    @property
    def curve_exponent(self) -> float:
        return self.curve.exponent

    @property
    def relative_speed(self) -> float:
        return self.curve.speed

    def bounds(self) -> Bounds:
        return self.flow_bounds or DEFAULT_PUMP_FLOW_BOUNDS

    def validate(self) -> bool:
        try:
            curve = self.curve
        except ValueError as exc:
            self.throw(f"Pump {self.id} has an invalid curve", exc)
            raise
        q_min, q_max = self.bounds()
        if q_min < 0 or q_min > q_max:
            self.throw(f"Pump {self.id} flow bounds must satisfy "
                       f"0 <= q_min <= q_max, got [{q_min}, {q_max}]")
        if curve.exponent <= 1:
            self.throw(f"Pump {self.id} curve exponent must exceed 1")
        return True
