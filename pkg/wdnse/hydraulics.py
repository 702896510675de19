"""Exact nonlinear relations of the network elements, in GPM and ft."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import TYPE_CHECKING, Optional

import numpy as np

from wdnse.errors import DimensionError, HydraulicDomainError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from wdnse.network import Network
    from wdnse.state import StateVector
    from wdnse.types import FloatArray


# One GPM expressed in ft³/s.
GPM_TO_CFS = 0.0022280

# Floor used in place of |q| inside derivatives at zero flow.
JACOBIAN_FLOW_FLOOR = 1e-6


@dataclass(frozen=True)
class HeadLossModel:
    resistance: float
    flow_exponent: float

    def __post_init__(self) -> None:
        if not self.resistance > 0:
            raise HydraulicDomainError(
                f"Resistance must be positive: {self.resistance}")
        if not self.flow_exponent >= 1:
            raise HydraulicDomainError(
                f"Flow exponent must be at least 1: {self.flow_exponent}")


@dataclass(frozen=True)
class PumpCurve:
    shutoff_head: float
    coefficient: float
    exponent: float
    speed: float = 1.0

    def __post_init__(self) -> None:
        if not self.shutoff_head > 0 or not self.coefficient > 0:
            raise HydraulicDomainError(
                "Pump shutoff head and curve coefficient must be positive: "
                f"h0={self.shutoff_head}, r={self.coefficient}")
        if not self.exponent > 1:
            raise HydraulicDomainError(
                f"Pump curve exponent must exceed 1: {self.exponent}")
        if self.speed != 1.0:
            raise HydraulicDomainError(
                f"Only full speed pumps are modeled, got s={self.speed}")

    def max_flow(self) -> float:
        """Flow at which the pump stops adding head."""
        return float(
            self.speed * (self.shutoff_head / self.coefficient)
            ** (1.0 / self.exponent))


def pipe_headloss(q: float, model: HeadLossModel) -> float:
    return model.resistance * q * abs(q) ** (model.flow_exponent - 1.0)


def pipe_headloss_slope(q: float, model: HeadLossModel,
                        regularize: bool = True) -> float:
    magnitude = abs(q)
    if regularize:
        magnitude += JACOBIAN_FLOW_FLOOR
    return (model.flow_exponent * model.resistance
            * magnitude ** (model.flow_exponent - 1.0))


def pump_headgain(q: float, curve: PumpCurve) -> float:
    if q < 0:
        raise HydraulicDomainError(f"Pump flow must be non-negative: {q}")
    s = curve.speed
    return -s * s * (curve.shutoff_head
                     - curve.coefficient * (q / s) ** curve.exponent)


def pump_headgain_extended(q: float, curve: PumpCurve) -> float:
    """Pump head gain continued oddly into reverse flow. Only the oracle
    iterations use this, so they can pass through q < 0."""
    return -curve.shutoff_head + curve.coefficient * q * abs(q) ** (
        curve.exponent - 1.0)


def pump_headgain_slope(q: float, curve: PumpCurve) -> float:
    magnitude = abs(q) + JACOBIAN_FLOW_FLOOR
    return (curve.exponent * curve.coefficient
            * magnitude ** (curve.exponent - 1.0))


def tank_step(h: float, net_inflow: float, area: float, dt: float) -> float:
    if not area > 0:
        raise HydraulicDomainError(f"Tank area must be positive: {area}")
    if not dt > 0:
        raise HydraulicDomainError(f"Time step must be positive: {dt}")
    return h + (dt / area) * (net_inflow * GPM_TO_CFS)


def hazen_williams_resistance(length: float, diameter_in: float,
                              roughness: float) -> float:
    diameter_ft = diameter_in / 12.0
    r_cfs = 4.727 * length / (roughness ** 1.852 * diameter_ft ** 4.871)
    return r_cfs * GPM_TO_CFS ** 1.852


def darcy_weisbach_resistance(length: float, diameter_in: float,
                              roughness: float) -> float:
    # Roughness in millifeet, fully rough friction factor.
    diameter_ft = diameter_in / 12.0
    relative = (roughness / 1000.0) / (3.7 * diameter_ft)
    friction = 0.25 / math.log10(relative) ** 2
    r_cfs = 0.0252 * friction * length / diameter_ft ** 5
    return r_cfs * GPM_TO_CFS ** 2


def chezy_manning_resistance(length: float, diameter_in: float,
                             roughness: float) -> float:
    diameter_ft = diameter_in / 12.0
    r_cfs = 4.66 * roughness ** 2 * length / diameter_ft ** 5.33
    return r_cfs * GPM_TO_CFS ** 2


def junction_imbalance(net: Network, state: StateVector, step: int = 0,
                       demands: Optional[Sequence[float]] = None
                       ) -> FloatArray:
    """Per junction: inflow minus outflow minus demand, in GPM."""
    if state.link_count() != net.link_count():
        raise DimensionError(
            f"State has {state.link_count()} flows, network has "
            f"{net.link_count()} links")
    if state.node_count() != net.node_count():
        raise DimensionError(
            f"State has {state.node_count()} heads, network has "
            f"{net.node_count()} nodes")
    if demands is None:
        demand_vec = np.array([j.demand for j in net.junctions], dtype=float)
    else:
        demand_vec = np.asarray(demands, dtype=float)
        if demand_vec.shape != (len(net.junctions),):
            raise DimensionError(
                f"Expected {len(net.junctions)} demands, got "
                f"{demand_vec.shape}")
    flows = state.link_flows(step)
    imbalance = -demand_vec.copy()
    for link in net.links():
        q = flows[net.link_index[link.id]]
        to_row = net.junction_row(link.to_node)
        if to_row is not None:
            imbalance[to_row] += q
        from_row = net.junction_row(link.from_node)
        if from_row is not None:
            imbalance[from_row] -= q
    return imbalance
