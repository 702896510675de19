"""Per-iteration constants of the log-domain linearization.

With every head and flow written as a power of a base b > 1, the pipe and
pump models become monomial equalities whose logarithms are linear:

    pipe:  h_i - h_j = q + C^P,         C^P = q'(R|q'|^(μ-1) - 1)
    pump:  h_i - h_j = C1 + C2·q,       C1 = -s²h0,  C2 = r·q'^(ν-1)·s^(2-ν)

where q' is the flow of the previous iterate. The base cancels, so the
constants never depend on it; GpConfig only matters to the monomial
self-check below."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import TYPE_CHECKING

import numpy as np

from wdnse.errors import DimensionError, HydraulicDomainError

if TYPE_CHECKING:
    from typing import Optional

    from wdnse.hydraulics import HeadLossModel, PumpCurve
    from wdnse.network import Network
    from wdnse.state import StateVector
    from wdnse.types import FloatArray


# Pump flows are clamped to this floor before computing slopes [GPM].
PUMP_FLOW_FLOOR = 1e-3

EQUIVALENCE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GpConfig:
    base: float = 1.001

    def __post_init__(self) -> None:
        if not (self.base > 1 and math.isfinite(self.base)):
            raise ValueError(f"GP base must exceed 1, got {self.base}")

    @property
    def delta(self) -> float:
        return self.base - 1.0

    @staticmethod
    def from_delta(delta: float) -> GpConfig:
        return GpConfig(1.0 + delta)


@dataclass(frozen=True, eq=False)
class LinearCoefficients:
    # One row per time step.
    pipe_constants: FloatArray
    pump_intercepts: FloatArray
    pump_slopes: FloatArray

    def __post_init__(self) -> None:
        for name in ("pipe_constants", "pump_intercepts", "pump_slopes"):
            values = getattr(self, name)
            if values.ndim != 2:
                raise DimensionError(f"{name} must have one row per step")
            if not np.all(np.isfinite(values)):
                raise HydraulicDomainError(f"{name} has non-finite entries")

    @property
    def horizon(self) -> int:
        return int(self.pipe_constants.shape[0])


def pipe_coefficient(q_prev: float, model: HeadLossModel) -> float:
    return q_prev * (model.resistance
                     * abs(q_prev) ** (model.flow_exponent - 1.0) - 1.0)


def pump_coefficients(q_prev: float,
                      curve: PumpCurve) -> tuple[float, float]:
    if not q_prev > 0:
        raise HydraulicDomainError(
            f"Pump slope needs a positive flow, got {q_prev}")
    s = curve.speed
    intercept = -s * s * curve.shutoff_head
    slope = (curve.coefficient * q_prev ** (curve.exponent - 1.0)
             * s ** (2.0 - curve.exponent))
    return intercept, slope


def update_coefficients(net: Network, state_prev: StateVector,
                        cfg: Optional[GpConfig] = None
                        ) -> LinearCoefficients:
    # pylint: disable=unused-argument
    state_prev.check_matches(net)
    horizon = state_prev.horizon
    pipe_constants = np.zeros((horizon, len(net.pipes)))
    intercepts = np.zeros((horizon, len(net.pumps)))
    slopes = np.zeros((horizon, len(net.pumps)))
    for k in range(horizon):
        for i, pipe in enumerate(net.pipes):
            pipe_constants[k, i] = pipe_coefficient(
                float(state_prev.pipe_flows[k, i]), pipe.headloss_model())
        for i, pump in enumerate(net.pumps):
            q_prev = max(float(state_prev.pump_flows[k, i]), PUMP_FLOW_FLOOR)
            intercepts[k, i], slopes[k, i] = pump_coefficients(
                q_prev, pump.curve)
    return LinearCoefficients(pipe_constants, intercepts, slopes)


@dataclass(frozen=True)
class Monomial:
    """c · Π x_v^a_v over positive variables, kept in log form."""
    log_coefficient: float
    exponents: dict[str, float]

    def log_value(self, log_values: dict[str, float]) -> float:
        total = self.log_coefficient
        for name, exponent in self.exponents.items():
            total += exponent * log_values[name]
        return total


def exponential_logs(cfg: GpConfig, **values: float) -> dict[str, float]:
    """log of b^v for each named value."""
    log_base = math.log(cfg.base)
    return {name: value * log_base for name, value in values.items()}


def gp_linear_equivalence(q: float, h_i: float, h_j: float,
                          model: HeadLossModel,
                          cfg: Optional[GpConfig] = None) -> bool:
    """True iff ĥ_i · ĥ_j⁻¹ · Ĉ⁻¹ · q̂⁻¹ = 1 with x̂ = b^x and C taken at q,
    i.e. iff the linear pipe relation holds at (q, h_i, h_j)."""
    cfg = cfg or GpConfig()
    c_pipe = pipe_coefficient(q, model)
    monomial = Monomial(0.0, {"h_i": 1.0, "h_j": -1.0, "c": -1.0, "q": -1.0})
    logs = exponential_logs(cfg, h_i=h_i, h_j=h_j, c=c_pipe, q=q)
    scale = max(1.0, abs(h_i), abs(h_j), abs(c_pipe), abs(q))
    return (abs(monomial.log_value(logs)) / math.log(cfg.base)
            <= EQUIVALENCE_TOLERANCE * scale)


def gp_pump_equivalence(q: float, h_i: float, h_j: float,
                        curve: PumpCurve,
                        cfg: Optional[GpConfig] = None) -> bool:
    """Pump counterpart: ĥ_i · ĥ_j⁻¹ · Ĉ1⁻¹ · q̂^(-C2) = 1."""
    cfg = cfg or GpConfig()
    intercept, slope = pump_coefficients(q, curve)
    monomial = Monomial(0.0, {"h_i": 1.0, "h_j": -1.0, "c1": -1.0,
                              "q": -slope})
    logs = exponential_logs(cfg, h_i=h_i, h_j=h_j, c1=intercept, q=q)
    scale = max(1.0, abs(h_i), abs(h_j), abs(intercept), abs(slope * q))
    return (abs(monomial.log_value(logs)) / math.log(cfg.base)
            <= EQUIVALENCE_TOLERANCE * scale)
