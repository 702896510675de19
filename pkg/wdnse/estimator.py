"""Successive linear approximation of the network state.

Each iteration refreshes the linearization constants from the previous
state, assembles one convex program over all heads and flows of all time
steps, and solves it. Every `acceleration_period` iterations the new state
is pushed further along ξ_n - ξ_{n-2}. The loop stops once two consecutive
states are closer than `threshold` in the Euclidean norm."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from wdnse.errors import DimensionError, EstimationError
from wdnse.linearization import GpConfig, update_coefficients
from wdnse.misc_utils import brief_float, print_debug, print_warning
from wdnse.network.incidence import build_incidence
from wdnse.solver import ActiveSetSolver, ConvexProgram
from wdnse.state import StateVector
from wdnse.types import EstimateStatus, ObjectiveKind, SolveStatus

if TYPE_CHECKING:
    from typing import Optional

    from wdnse.linearization import LinearCoefficients
    from wdnse.network import Network
    from wdnse.network.incidence import IncidenceOperators
    from wdnse.state import MeasurementSet
    from wdnse.types import FloatArray


DEFAULT_INITIAL_FLOW = 100.0


@dataclass(frozen=True)
class EstimatorConfig:
    gp: GpConfig = field(default_factory=GpConfig)
    threshold: float = 1e-4
    max_iterations: int = 100
    acceleration_period: int = 4
    acceleration_gain: float = 3.0
    objective_kind: ObjectiveKind = ObjectiveKind.WEIGHTED_LEAST_SQUARES
    horizon: int = 1
    # Seconds between steps; None uses the network hydraulic time step.
    dt: Optional[float] = None
    # An extrapolated step whose error exceeds this multiple of the
    # previous error is discarded.
    rollback_growth: float = 10.0

    def __post_init__(self) -> None:
        if not self.threshold > 0:
            raise ValueError(
                f"Convergence threshold must be positive: {self.threshold}")
        if self.max_iterations < 1:
            raise ValueError(
                f"Iteration limit must be at least 1: {self.max_iterations}")
        if self.acceleration_period < 2:
            raise ValueError(
                "Acceleration period must be at least 2: "
                f"{self.acceleration_period}")
        if self.acceleration_gain < 0:
            raise ValueError(
                f"Acceleration gain must be non-negative: "
                f"{self.acceleration_gain}")
        if self.horizon < 1:
            raise ValueError(f"Horizon must be at least 1: {self.horizon}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"Time step must be positive: {self.dt}")


@dataclass
class IterationRecord:
    n: int
    state: StateVector
    error: float
    objective: float
    accelerated: bool
    rolled_back: bool = False
    reference_error: Optional[float] = None


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: EstimateStatus = EstimateStatus.ITERATION_LIMIT

    @property
    def converged(self) -> bool:
        return self.status == EstimateStatus.CONVERGED

    @property
    def iterations(self) -> int:
        return len(self.records)

    def final_error(self) -> float:
        if not self.records:
            return float("inf")
        return self.records[-1].error

    def errors(self) -> list[float]:
        return [r.error for r in self.records]


class VariableLayout:
    """Positions of heads and flows in the stacked program vector."""

    def __init__(self, net: Network, horizon: int) -> None:
        self.net = net
        self.horizon = horizon
        self.node_count = net.node_count()
        self.width = self.node_count + net.link_count()

    @property
    def size(self) -> int:
        return self.width * self.horizon

    def head(self, node_id: str, step: int) -> int:
        return step * self.width + self.net.node_index[node_id]

    def flow(self, link_id: str, step: int) -> int:
        return (step * self.width + self.node_count
                + self.net.link_index[link_id])

    def flows(self, step: int) -> slice:
        start = step * self.width + self.node_count
        return slice(start, (step + 1) * self.width)


def assemble(net: Network, inc: IncidenceOperators, meas: MeasurementSet,
             coeffs: LinearCoefficients, cfg: EstimatorConfig,
             iteration: int = 0) -> ConvexProgram:
    # pylint: disable=too-many-locals,too-many-arguments
    horizon = cfg.horizon
    if coeffs.horizon != horizon:
        raise DimensionError(
            f"Coefficients cover {coeffs.horizon} steps, horizon is "
            f"{horizon}")
    if (coeffs.pipe_constants.shape[1] != len(net.pipes)
            or coeffs.pump_slopes.shape[1] != len(net.pumps)):
        raise DimensionError("Coefficients do not match the network links")
    meas.validate_against(net, horizon)

    layout = VariableLayout(net, horizon)
    demands = meas.demand_matrix(net, horizon)
    fixed = meas.fixed_heads(net)
    rows: list[FloatArray] = []
    rhs: list[float] = []

    def new_row() -> FloatArray:
        row = np.zeros(layout.size)
        rows.append(row)
        return row

    for k in range(horizon):
        flows = layout.flows(k)
        for j, junction in enumerate(net.junctions):
            new_row()[flows] = inc.mass_matrix[j]
            rhs.append(float(demands[k, j]))

        if k + 1 < horizon:
            for t, tank in enumerate(net.tanks):
                row = new_row()
                row[layout.head(tank.id, k + 1)] = 1.0
                row[layout.head(tank.id, k)] = -1.0
                row[flows] -= inc.tank_matrix[t]
                rhs.append(0.0)

        for i, pipe in enumerate(net.pipes):
            row = new_row()
            row[layout.head(pipe.from_node, k)] += 1.0
            row[layout.head(pipe.to_node, k)] -= 1.0
            row[layout.flow(pipe.id, k)] = -1.0
            rhs.append(float(coeffs.pipe_constants[k, i]))

        for i, pump in enumerate(net.pumps):
            row = new_row()
            row[layout.head(pump.from_node, k)] += 1.0
            row[layout.head(pump.to_node, k)] -= 1.0
            row[layout.flow(pump.id, k)] = -float(coeffs.pump_slopes[k, i])
            rhs.append(float(coeffs.pump_intercepts[k, i]))

        for reservoir in net.reservoirs:
            new_row()[layout.head(reservoir.id, k)] = 1.0
            rhs.append(fixed[reservoir.id])

    for tank in net.tanks:
        if tank.id in fixed:
            new_row()[layout.head(tank.id, 0)] = 1.0
            rhs.append(fixed[tank.id])

    lower = np.full(layout.size, -np.inf)
    upper = np.full(layout.size, np.inf)
    for k in range(horizon):
        for node in net.nodes():
            if node.as_reservoir_node() is not None:
                continue
            index = layout.head(node.id, k)
            lower[index], upper[index] = node.bounds()
        for pipe in net.pipes:
            index = layout.flow(pipe.id, k)
            lower[index], upper[index] = pipe.bounds()
        for i, pump in enumerate(net.pumps):
            index = layout.flow(pump.id, k)
            q_min, q_max = pump.bounds()
            # Head gain C1 + C2·q stays non-positive.
            gain_limit = (-float(coeffs.pump_intercepts[k, i])
                          / float(coeffs.pump_slopes[k, i]))
            if q_min > gain_limit:
                raise EstimationError(
                    f"Pump {pump.id} cannot add head above its lower flow "
                    f"bound {brief_float(q_min)}: gain reaches zero at "
                    f"{brief_float(gain_limit)}", iteration)
            lower[index], upper[index] = q_min, min(q_max, gain_limit)

    residual_matrix = np.zeros((len(meas.entries), layout.size))
    for m, entry in enumerate(meas.entries):
        residual_matrix[m, layout.head(entry.from_node, entry.step)] += 1.0
        residual_matrix[m, layout.head(entry.to_node, entry.step)] -= 1.0

    equality = (np.vstack(rows) if rows else np.zeros((0, layout.size)))
    return ConvexProgram(
        cfg.objective_kind, residual_matrix, meas.values(), meas.weights(),
        equality, np.array(rhs, dtype=float), lower, upper)


def residual(net: Network, inc: IncidenceOperators, meas: MeasurementSet,
             state: StateVector) -> FloatArray:
    """ε_m = (h_i - h_j) - Δh̃_m for every measurement, in ft."""
    state.check_matches(net)
    sensors = set(inc.sensors)
    eps = np.zeros(len(meas.entries))
    for m, entry in enumerate(meas.entries):
        if entry.pair() not in sensors:
            raise DimensionError(
                f"Measurement {entry.from_node}->{entry.to_node} has no row "
                "in the incidence operators")
        heads = state.node_heads(entry.step)
        eps[m] = (heads[net.node_index[entry.from_node]]
                  - heads[net.node_index[entry.to_node]] - entry.value)
    return eps


def objective_value(meas: MeasurementSet, eps: FloatArray,
                    kind: ObjectiveKind = (
                        ObjectiveKind.WEIGHTED_LEAST_SQUARES)) -> float:
    if kind == ObjectiveKind.WEIGHTED_ABSOLUTE:
        return float(meas.weights() @ np.abs(eps))
    return float(meas.weights() @ (eps * eps))


def default_initial_state(net: Network, meas: MeasurementSet,
                          horizon: int = 1,
                          default_flow: float = DEFAULT_INITIAL_FLOW
                          ) -> StateVector:
    fixed = meas.fixed_heads(net)
    heads = np.array([fixed.get(n.id, n.reference_head())
                      for n in net.nodes()], dtype=float)
    flows = np.array([meas.initial_flows.get(l.id, default_flow)
                      for l in net.links()], dtype=float)
    row = np.concatenate([heads, flows])
    return StateVector.from_vector(net, np.tile(row, horizon), horizon)


class SuccessiveEstimator:
    net: Network
    meas: MeasurementSet
    cfg: EstimatorConfig
    inc: IncidenceOperators
    solver: ActiveSetSolver
    debug: bool

    def __init__(self, net: Network, meas: MeasurementSet,
                 cfg: Optional[EstimatorConfig] = None,
                 debug: bool = False) -> None:
        self.net = net
        self.meas = meas
        self.cfg = cfg or EstimatorConfig()
        self.debug = debug
        meas.validate_against(net, self.cfg.horizon)
        self.inc = build_incidence(net, meas.sensors(), self.cfg.dt)
        self.solver = ActiveSetSolver(debug=debug)

    def program_at(self, state: StateVector,
                   iteration: int = 0) -> ConvexProgram:
        coeffs = update_coefficients(self.net, state, self.cfg.gp)
        return assemble(self.net, self.inc, self.meas, coeffs, self.cfg,
                        iteration)

    def to_state(self, x: FloatArray) -> StateVector:
        return StateVector.from_vector(self.net, x, self.cfg.horizon)

    def run(self, initial: StateVector,
            reference: Optional[StateVector] = None
            ) -> tuple[StateVector, IterationTrace]:
        # pylint: disable=too-many-locals
        cfg = self.cfg
        initial.check_matches(self.net)
        if initial.horizon != cfg.horizon:
            raise DimensionError(
                f"Initial state has {initial.horizon} steps, horizon is "
                f"{cfg.horizon}")
        if not initial.is_finite():
            raise ValueError("Initial state must be finite")
        ref_vec = None if reference is None else reference.to_vector()

        trace = IterationTrace()
        # history[-1] is ξ_{n-1}, history[-2] is ξ_{n-2}.
        history = [initial.to_vector()]
        # Iterate before extrapolation, kept until the next program solves.
        unextrapolated: Optional[FloatArray] = None
        n = 1
        while n <= cfg.max_iterations:
            x_save = history[-1]
            result = self.solver.solve(
                self.program_at(self.to_state(x_save), n))
            if result.status in (SolveStatus.INFEASIBLE,
                                 SolveStatus.UNBOUNDED):
                if unextrapolated is not None:
                    self.roll_back(trace, history, unextrapolated, ref_vec)
                    unextrapolated = None
                    continue
                raise EstimationError(
                    f"Subproblem is {result.status.value}", n)
            if result.status == SolveStatus.ITERATION_LIMIT and self.debug:
                print_warning(f"iteration {n}: subproblem stopped at its "
                              f"iteration cap, KKT residual "
                              f"{brief_float(result.kkt_residual)}")
            unextrapolated = None

            x_n = result.solution
            accelerated = False
            if (cfg.acceleration_gain > 0 and n % cfg.acceleration_period == 0
                    and len(history) >= 2):
                candidate = x_n + cfg.acceleration_gain * (x_n - history[-2])
                previous_error = (trace.records[-1].error if trace.records
                                  else np.inf)
                candidate_error = float(np.linalg.norm(candidate - x_save))
                if not np.all(np.isfinite(candidate)):
                    print_debug(self.debug,
                                f"iteration {n}: extrapolation not finite")
                elif candidate_error > cfg.rollback_growth * previous_error:
                    print_debug(self.debug,
                                f"iteration {n}: extrapolation grows error "
                                f"to {brief_float(candidate_error)}")
                else:
                    unextrapolated = x_n
                    x_n = candidate
                    accelerated = True

            error = float(np.linalg.norm(x_n - x_save))
            trace.records.append(IterationRecord(
                n, self.to_state(x_n), error, result.objective_value,
                accelerated,
                reference_error=(None if ref_vec is None
                                 else float(np.linalg.norm(x_n - ref_vec)))))
            history.append(x_n)
            print_debug(self.debug,
                        f"iteration {n}: error {brief_float(error)} "
                        f"objective {brief_float(result.objective_value)}"
                        + (" (accelerated)" if accelerated else ""))
            if error < cfg.threshold:
                trace.status = EstimateStatus.CONVERGED
                break
            n += 1

        return trace.records[-1].state.copy() if trace.records else (
            initial.copy()), trace

    def roll_back(self, trace: IterationTrace, history: list[FloatArray],
                  unextrapolated: FloatArray,
                  ref_vec: Optional[FloatArray]) -> None:
        """Replaces the last, extrapolated iterate by the plain one."""
        record = trace.records[-1]
        print_debug(self.debug,
                    f"iteration {record.n}: program after extrapolation is "
                    "infeasible, rolling back")
        history[-1] = unextrapolated
        record.state = self.to_state(unextrapolated)
        record.error = float(np.linalg.norm(unextrapolated - history[-2]))
        record.accelerated = False
        record.rolled_back = True
        if ref_vec is not None:
            record.reference_error = float(
                np.linalg.norm(unextrapolated - ref_vec))


def run(net: Network, meas: MeasurementSet,
        cfg: Optional[EstimatorConfig] = None,
        initial: Optional[StateVector] = None,
        reference: Optional[StateVector] = None,
        debug: bool = False) -> tuple[StateVector, IterationTrace]:
    cfg = cfg or EstimatorConfig()
    estimator = SuccessiveEstimator(net, meas, cfg, debug)
    if initial is None:
        initial = default_initial_state(net, meas, cfg.horizon)
    return estimator.run(initial, reference)

