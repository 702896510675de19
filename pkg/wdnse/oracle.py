"""Exact nonlinear solvers used to check the estimator.

`solve_hydraulics` is a damped Newton method on the full set of link and
junction equations with every tank and reservoir head held fixed.

`solve_se_global` estimates the state directly on the nonlinear model. Tanks
and reservoirs are merged into one root and a breadth first spanning tree is
grown from it, so that chord flows determine all tree flows through junction
balance, and heads follow from the root along the tree. What remains are the
chord energy equations, handled as equality constraints of a Gauss-Newton
iteration that is restarted from random points."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
import os
from typing import TYPE_CHECKING

import numpy as np

from wdnse.errors import DimensionError, NetworkValidationError
from wdnse.errors import NoConvergenceError
from wdnse.hydraulics import junction_imbalance, pipe_headloss
from wdnse.hydraulics import pipe_headloss_slope, pump_headgain_extended
from wdnse.hydraulics import pump_headgain_slope
from wdnse.misc_utils import brief_float, print_debug
from wdnse.network.incidence import signed_incidence
from wdnse.state import StateVector

if TYPE_CHECKING:
    from collections.abc import Mapping
    from typing import Optional

    from wdnse.network import Network
    from wdnse.network.link import Link
    from wdnse.state import MeasurementSet
    from wdnse.types import Bounds, FloatArray, LinkId, NodeId


SEED_ENV_VAR = "WDN_SEED"
DEFAULT_STARTS = 32

NEWTON_MAX_ITERATIONS = 200
NEWTON_MAX_HALVINGS = 10
NEWTON_START_FLOW = 100.0
EQUATION_TOLERANCE = 1e-8

GAUSS_NEWTON_MAX_ITERATIONS = 200
GAUSS_NEWTON_MAX_HALVINGS = 30
STEP_TOLERANCE = 1e-10

# Random starts never reach further than this multiple of the total demand.
START_FLOW_FACTOR = 2.0
MIN_START_FLOW = 100.0

ROOT = "<root>"


@dataclass
class OracleResult:
    state: StateVector
    max_equation_residual: float
    starts_tried: int
    best_objective: float
    seed: Optional[int] = None
    converged: bool = True
    iterations: int = 0


def link_headloss(link: Link, q: float) -> float:
    """h_from - h_to implied by flow q."""
    if pipe := link.as_pipe_link():
        return pipe_headloss(q, pipe.headloss_model())
    if pump := link.as_pump_link():
        return pump_headgain_extended(q, pump.curve)
    raise NetworkValidationError(f"Unknown link kind: {link.describe()}")


def link_headloss_slope(link: Link, q: float) -> float:
    if pipe := link.as_pipe_link():
        return pipe_headloss_slope(q, pipe.headloss_model())
    if pump := link.as_pump_link():
        return pump_headgain_slope(q, pump.curve)
    raise NetworkValidationError(f"Unknown link kind: {link.describe()}")


def max_equation_residual(net: Network, state: StateVector,
                          demands: Optional[FloatArray] = None,
                          step: int = 0) -> float:
    """Largest violation of the exact link and junction equations."""
    state.check_matches(net)
    heads = state.node_heads(step)
    flows = state.link_flows(step)
    worst = 0.0
    for link in net.links():
        h_from = heads[net.node_index[link.from_node]]
        h_to = heads[net.node_index[link.to_node]]
        q = float(flows[net.link_index[link.id]])
        worst = max(worst, abs(h_from - h_to - link_headloss(link, q)))
    imbalance = junction_imbalance(net, state, step, demands)
    return max(worst, float(np.max(np.abs(imbalance), initial=0.0)))


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(
            f"{SEED_ENV_VAR} must be an integer, got '{raw}'") from exc


def boundary_heads(net: Network,
                   fixed_heads: Optional[Mapping[NodeId, float]]
                   ) -> dict[NodeId, float]:
    heads: dict[NodeId, float] = {r.id: r.head for r in net.reservoirs}
    heads.update({t.id: t.initial_head for t in net.tanks})
    for node_id, value in (fixed_heads or {}).items():
        if net.node(node_id).is_junction():
            raise NetworkValidationError(
                f"Junction {node_id} cannot have a fixed head")
        heads[node_id] = float(value)
    return heads


def solve_hydraulics(net: Network,
                     fixed_heads: Optional[Mapping[NodeId, float]] = None,
                     demands: Optional[FloatArray] = None,
                     debug: bool = False) -> OracleResult:
    # pylint: disable=too-many-locals
    boundary = boundary_heads(net, fixed_heads)
    demand_vec = (np.array([j.demand for j in net.junctions], dtype=float)
                  if demands is None else np.asarray(demands, dtype=float))
    if demand_vec.shape != (len(net.junctions),):
        raise DimensionError(
            f"Expected {len(net.junctions)} demands, got {demand_vec.shape}")

    links = list(net.links())
    n_links, n_junctions = len(links), len(net.junctions)
    mass = signed_incidence(net, [j.id for j in net.junctions])

    def unpack(z: FloatArray) -> tuple[FloatArray, FloatArray]:
        heads = np.zeros(net.node_count())
        for node_id, value in boundary.items():
            heads[net.node_index[node_id]] = value
        heads[:n_junctions] = z[n_links:]
        return z[:n_links], heads

    def equations(z: FloatArray) -> FloatArray:
        flows, heads = unpack(z)
        link_part = np.array([
            heads[net.node_index[l.from_node]]
            - heads[net.node_index[l.to_node]]
            - link_headloss(l, float(flows[i]))
            for i, l in enumerate(links)])
        return np.concatenate([link_part, mass @ flows - demand_vec])

    def jacobian(z: FloatArray) -> FloatArray:
        flows = z[:n_links]
        matrix = np.zeros((n_links + n_junctions, n_links + n_junctions))
        for i, link in enumerate(links):
            matrix[i, i] = -link_headloss_slope(link, float(flows[i]))
            for node_id, sign in ((link.from_node, 1.0),
                                  (link.to_node, -1.0)):
                row = net.junction_row(node_id)
                if row is not None:
                    matrix[i, n_links + row] += sign
        matrix[n_links:, :n_links] = mass
        return matrix

    start_head = float(np.mean(list(boundary.values())))
    z = np.concatenate([np.full(n_links, NEWTON_START_FLOW),
                        np.full(n_junctions, start_head)])
    f = equations(z)
    iterations = 0
    while float(np.max(np.abs(f), initial=0.0)) > EQUATION_TOLERANCE:
        iterations += 1
        if iterations > NEWTON_MAX_ITERATIONS:
            raise NoConvergenceError(
                f"Hydraulic solve did not converge in "
                f"{NEWTON_MAX_ITERATIONS} iterations, residual "
                f"{brief_float(float(np.max(np.abs(f))))}")
        step = np.linalg.lstsq(jacobian(z), -f, rcond=None)[0]
        norm = float(np.linalg.norm(f))
        t = 1.0
        candidate = z + step
        f_candidate = equations(candidate)
        for _ in range(NEWTON_MAX_HALVINGS):
            if float(np.linalg.norm(f_candidate)) < norm:
                break
            t *= 0.5
            candidate = z + t * step
            f_candidate = equations(candidate)
        if not np.all(np.isfinite(f_candidate)):
            raise NoConvergenceError(
                f"Hydraulic solve diverged at iteration {iterations}")
        z, f = candidate, f_candidate
        print_debug(debug, f"newton {iterations}: residual "
                    f"{brief_float(float(np.max(np.abs(f))))} step {t}")

    flows, heads = unpack(z)
    state = StateVector.from_vector(net, np.concatenate([heads, flows]))
    return OracleResult(
        state, max_equation_residual(net, state, demand_vec), 1, 0.0,
        iterations=iterations)


class SpanningTreeModel:
    """Heads and flows of a single step as functions of the chord flows
    and the free tank heads."""
    # pylint: disable=too-many-instance-attributes

    net: Network
    fixed: dict[NodeId, float]
    free_tanks: list[NodeId]
    tree: dict[NodeId, Link]
    order: list[NodeId]
    chords: list[Link]
    base_flows: FloatArray
    chord_map: FloatArray

    def __init__(self, net: Network, fixed: Mapping[NodeId, float],
                 demands: FloatArray) -> None:
        self.net = net
        self.fixed = {r.id: r.head for r in net.reservoirs}
        self.fixed.update(fixed)
        self.free_tanks = [t.id for t in net.tanks if t.id not in self.fixed]
        self.grow_tree()

        tree_ids = {link.id for link in self.tree.values()}
        self.chords = [l for l in net.links() if l.id not in tree_ids]
        mass = signed_incidence(net, [j.id for j in net.junctions])
        n_links = net.link_count()
        self.base_flows = np.zeros(n_links)
        self.chord_map = np.zeros((n_links, len(self.chords)))
        chord_cols = [net.link_index[l.id] for l in self.chords]
        for position, col in enumerate(chord_cols):
            self.chord_map[col, position] = 1.0
        if net.junctions:
            tree_cols = [net.link_index[self.tree[j.id].id]
                         for j in net.junctions]
            tree_matrix = mass[:, tree_cols]
            self.base_flows[tree_cols] = np.linalg.solve(tree_matrix, demands)
            self.chord_map[tree_cols, :] = -np.linalg.solve(
                tree_matrix, mass[:, chord_cols])

    def contracted(self, node_id: NodeId) -> NodeId:
        return node_id if self.net.node(node_id).is_junction() else ROOT

    def grow_tree(self) -> None:
        root_links = sorted(
            (l for l in self.net.links()
             if ROOT in (self.contracted(l.from_node),
                         self.contracted(l.to_node))),
            key=lambda l: l.id)
        self.tree, self.order = {}, []
        visited = {ROOT}
        queue = deque([ROOT])
        while queue:
            current = queue.popleft()
            candidates = (root_links if current == ROOT
                          else self.net.links_at(current))
            for link in candidates:
                ends = (self.contracted(link.from_node),
                        self.contracted(link.to_node))
                other = ends[1] if ends[0] == current else ends[0]
                if other in visited:
                    continue
                visited.add(other)
                self.tree[other] = link
                self.order.append(other)
                queue.append(other)
        if len(self.order) != len(self.net.junctions):
            raise NetworkValidationError(
                "Some junctions cannot reach a tank or reservoir")

    @property
    def variable_count(self) -> int:
        return len(self.chords) + len(self.free_tanks)

    def flows(self, y: FloatArray) -> FloatArray:
        return self.base_flows + self.chord_map @ y[:len(self.chords)]

    def heads(self, y: FloatArray
              ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Node heads with their Jacobian, plus the link flows."""
        net = self.net
        flows = self.flows(y)
        flow_jac = np.zeros((net.link_count(), self.variable_count))
        flow_jac[:, :len(self.chords)] = self.chord_map
        heads = np.zeros(net.node_count())
        head_jac = np.zeros((net.node_count(), self.variable_count))
        for node_id, value in self.fixed.items():
            heads[net.node_index[node_id]] = value
        for position, tank_id in enumerate(self.free_tanks):
            index = net.node_index[tank_id]
            heads[index] = y[len(self.chords) + position]
            head_jac[index, len(self.chords) + position] = 1.0

        for junction_id in self.order:
            link = self.tree[junction_id]
            col = net.link_index[link.id]
            q = float(flows[col])
            loss = link_headloss(link, q)
            d_loss = link_headloss_slope(link, q) * flow_jac[col]
            index = net.node_index[junction_id]
            if link.to_node == junction_id:
                known = net.node_index[link.from_node]
                heads[index] = heads[known] - loss
                head_jac[index] = head_jac[known] - d_loss
            else:
                known = net.node_index[link.to_node]
                heads[index] = heads[known] + loss
                head_jac[index] = head_jac[known] + d_loss
        return heads, head_jac, flows

    def evaluate(self, y: FloatArray, meas: MeasurementSet
                 ) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        """Measurement residuals and chord equations, with Jacobians."""
        net = self.net
        heads, head_jac, flows = self.heads(y)
        eps = np.zeros(len(meas.entries))
        eps_jac = np.zeros((len(meas.entries), self.variable_count))
        for m, entry in enumerate(meas.entries):
            i = net.node_index[entry.from_node]
            j = net.node_index[entry.to_node]
            eps[m] = heads[i] - heads[j] - entry.value
            eps_jac[m] = head_jac[i] - head_jac[j]
        cons = np.zeros(len(self.chords))
        cons_jac = np.zeros((len(self.chords), self.variable_count))
        for c, link in enumerate(self.chords):
            i = net.node_index[link.from_node]
            j = net.node_index[link.to_node]
            q = float(flows[net.link_index[link.id]])
            cons[c] = heads[i] - heads[j] - link_headloss(link, q)
            cons_jac[c] = head_jac[i] - head_jac[j]
            cons_jac[c, c] -= link_headloss_slope(link, q)
        return eps, eps_jac, cons, cons_jac

    def state(self, y: FloatArray) -> StateVector:
        heads, _, flows = self.heads(y)
        return StateVector.from_vector(self.net,
                                       np.concatenate([heads, flows]))


def default_start_bounds(net: Network, meas: MeasurementSet
                         ) -> dict[LinkId, Bounds]:
    """Link flow bounds, cut down to a multiple of the total demand."""
    total = float(np.sum(np.abs(meas.demand_matrix(net, 1))))
    reach = max(MIN_START_FLOW, START_FLOW_FACTOR * total)
    bounds: dict[LinkId, Bounds] = {}
    for link in net.links():
        low, high = link.bounds()
        bounds[link.id] = (max(low, -reach), min(high, reach))
    return bounds


def gauss_newton(model: SpanningTreeModel, meas: MeasurementSet,
                 y0: FloatArray) -> tuple[FloatArray, float, bool, int]:
    """Constrained Gauss-Newton from y0. Returns the point, its objective,
    whether the step size settled, and the iteration count."""
    # pylint: disable=too-many-locals
    weights = meas.weights()
    size = model.variable_count
    y = y0.copy()

    def merit(eps: FloatArray, cons: FloatArray, rho: float) -> float:
        return (0.5 * float(weights @ (eps * eps))
                + rho * float(np.sum(np.abs(cons))))

    settled = False
    iteration = 0
    for iteration in range(1, GAUSS_NEWTON_MAX_ITERATIONS + 1):
        eps, eps_jac, cons, cons_jac = model.evaluate(y, meas)
        if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(cons))):
            break
        rows = cons.size
        kkt = np.zeros((size + rows, size + rows))
        kkt[:size, :size] = (eps_jac.T * weights) @ eps_jac
        kkt[:size, size:] = cons_jac.T
        kkt[size:, :size] = cons_jac
        rhs = np.concatenate([-(eps_jac.T @ (weights * eps)), -cons])
        solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        step, multipliers = solution[:size], solution[size:]
        rho = max(1.0, 10.0 * float(np.max(np.abs(multipliers), initial=0.0)))
        current = merit(eps, cons, rho)

        t = 1.0
        for _ in range(GAUSS_NEWTON_MAX_HALVINGS):
            trial_eps, _, trial_cons, _ = model.evaluate(y + t * step, meas)
            trial = merit(trial_eps, trial_cons, rho)
            if np.isfinite(trial) and trial <= current + 1e-12 * (
                    1.0 + current):
                break
            t *= 0.5
        y = y + t * step
        moved = t * float(np.max(np.abs(step), initial=0.0))
        if moved <= STEP_TOLERANCE * (
                1.0 + float(np.max(np.abs(y), initial=0.0))):
            settled = True
            break

    eps, _, cons, _ = model.evaluate(y, meas)
    if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(cons))):
        return y, float("inf"), False, iteration
    if float(np.max(np.abs(cons), initial=0.0)) > EQUATION_TOLERANCE:
        return y, float("inf"), False, iteration
    return y, float(weights @ (eps * eps)), settled, iteration


def solve_se_global(net: Network, meas: MeasurementSet,
                    bounds: Optional[Mapping[LinkId, Bounds]] = None,
                    n_starts: int = DEFAULT_STARTS,
                    seed: Optional[int] = None,
                    debug: bool = False,
                    tank_bounds: Optional[Mapping[NodeId, Bounds]] = None
                    ) -> OracleResult:
    # pylint: disable=too-many-locals,too-many-arguments
    if n_starts < 1:
        raise ValueError(f"Need at least one start, got {n_starts}")
    meas.validate_against(net, 1)
    demands = meas.demand_matrix(net, 1)[0]
    model = SpanningTreeModel(net, meas.fixed_heads(net), demands)

    flow_box = default_start_bounds(net, meas)
    flow_box.update(bounds or {})
    head_box = {t.id: t.bounds() for t in net.tanks}
    head_box.update(tank_bounds or {})
    box = ([flow_box[l.id] for l in model.chords]
           + [head_box[t] for t in model.free_tanks])
    low = np.array([b[0] for b in box], dtype=float)
    high = np.array([b[1] for b in box], dtype=float)
    if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
        raise ValueError("Start bounds must be finite")

    used_seed = resolve_seed(seed)
    rng = np.random.default_rng(used_seed)
    best: Optional[tuple[FloatArray, float, bool, int]] = None
    for start in range(n_starts):
        y0 = rng.uniform(low, high)
        y, objective, settled, iterations = gauss_newton(model, meas, y0)
        print_debug(debug, f"start {start}: objective "
                    f"{brief_float(objective)} after {iterations} iterations")
        if not np.isfinite(objective):
            continue
        if best is None or objective < best[1]:
            best = (y, objective, settled, iterations)

    if best is None:
        raise NoConvergenceError(
            f"None of {n_starts} starts satisfied the network equations "
            f"(seed {used_seed})")
    y, objective, settled, iterations = best
    state = model.state(y)
    return OracleResult(
        state, max_equation_residual(net, state, demands), n_starts,
        objective, used_seed, settled, iterations)
