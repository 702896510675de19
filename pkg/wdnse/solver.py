"""Dense solver for the per-iteration convex programs.

    minimize   Σ w_m ε_m²   (weighted least squares)
          or   Σ w_m |ε_m|  (weighted absolute, via ε = u - v, u, v ≥ 0)
    where      ε = A_r x - b_r
    subject to A_eq x = b_eq,  lower ≤ x ≤ upper

Both kinds are brought to the standard form ½xᵀHx + cᵀx with equalities and
bounds and solved by a primal active-set method: dependent equality rows are
dropped by pivoted QR, a phase 1 LP finds a feasible point, then each
iteration minimizes over the null space of the equalities restricted to the
variables not held at a bound. Ties always go to the smallest index."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
import scipy.optimize

from wdnse.errors import DimensionError
from wdnse.misc_utils import print_debug
from wdnse.types import ObjectiveKind, SolveStatus

if TYPE_CHECKING:
    from typing import Optional

    from wdnse.types import FloatArray, IntArray


KKT_TOLERANCE = 1e-8
RANK_TOLERANCE = 1e-10

FREE = 0
AT_LOWER = -1
AT_UPPER = 1


@dataclass(frozen=True, eq=False)
class ConvexProgram:
    objective_kind: ObjectiveKind
    residual_matrix: FloatArray
    residual_offset: FloatArray
    weights: FloatArray
    equality_matrix: FloatArray
    equality_rhs: FloatArray
    lower: FloatArray
    upper: FloatArray

    def __post_init__(self) -> None:
        n = self.variable_count
        m = self.residual_matrix.shape[0]
        if self.residual_matrix.ndim != 2:
            raise DimensionError("Residual map must be a matrix")
        if self.residual_offset.shape != (m,) or self.weights.shape != (m,):
            raise DimensionError(
                f"Residual offset and weights must have length {m}")
        if (self.equality_matrix.ndim != 2
                or self.equality_matrix.shape[1] != n):
            raise DimensionError(
                f"Equality matrix must have {n} columns, has shape "
                f"{self.equality_matrix.shape}")
        if self.equality_rhs.shape != (self.equality_matrix.shape[0],):
            raise DimensionError("Equality right hand side has wrong length")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise DimensionError(f"Bounds must have length {n}")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("Weights must be positive and finite")
        if np.any(self.lower > self.upper):
            first = int(np.argmax(self.lower > self.upper))
            raise ValueError(
                f"Empty bounds for variable {first}: "
                f"[{self.lower[first]}, {self.upper[first]}]")

    @property
    def variable_count(self) -> int:
        return int(self.residual_matrix.shape[1])

    @property
    def residual_count(self) -> int:
        return int(self.residual_matrix.shape[0])

    @staticmethod
    def create(variable_count: int,
               objective_kind: ObjectiveKind = (
                   ObjectiveKind.WEIGHTED_LEAST_SQUARES),
               residual_matrix: Optional[FloatArray] = None,
               residual_offset: Optional[FloatArray] = None,
               weights: Optional[FloatArray] = None,
               equality_matrix: Optional[FloatArray] = None,
               equality_rhs: Optional[FloatArray] = None,
               lower: Optional[FloatArray] = None,
               upper: Optional[FloatArray] = None) -> ConvexProgram:
        n = variable_count
        a_r = (np.zeros((0, n)) if residual_matrix is None
               else np.atleast_2d(np.asarray(residual_matrix, dtype=float)))
        m = a_r.shape[0]
        b_r = (np.zeros(m) if residual_offset is None
               else np.asarray(residual_offset, dtype=float))
        w = np.ones(m) if weights is None else np.asarray(weights, float)
        a_eq = (np.zeros((0, n)) if equality_matrix is None
                else np.asarray(equality_matrix, dtype=float).reshape(-1, n))
        b_eq = (np.zeros(a_eq.shape[0]) if equality_rhs is None
                else np.asarray(equality_rhs, dtype=float))
        lo = (np.full(n, -np.inf) if lower is None
              else np.asarray(lower, dtype=float))
        hi = (np.full(n, np.inf) if upper is None
              else np.asarray(upper, dtype=float))
        return ConvexProgram(objective_kind, a_r, b_r, w, a_eq, b_eq, lo, hi)

    def residual(self, x: FloatArray) -> FloatArray:
        return self.residual_matrix @ x - self.residual_offset

    def objective(self, x: FloatArray) -> float:
        eps = self.residual(x)
        if self.objective_kind == ObjectiveKind.WEIGHTED_ABSOLUTE:
            return float(self.weights @ np.abs(eps))
        return float(self.weights @ (eps * eps))


@dataclass(frozen=True, eq=False)
class SolveResult:
    solution: FloatArray
    objective_value: float
    kkt_residual: float
    status: SolveStatus
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class StandardForm:
    """½xᵀHx + cᵀx + constant, A x = b, lower ≤ x ≤ upper."""
    hessian: FloatArray
    linear: FloatArray
    constant: float
    eq_matrix: FloatArray
    eq_rhs: FloatArray
    lower: FloatArray
    upper: FloatArray

    def objective(self, x: FloatArray) -> float:
        return float(0.5 * x @ self.hessian @ x + self.linear @ x
                     + self.constant)

    def gradient(self, x: FloatArray) -> FloatArray:
        return self.hessian @ x + self.linear


def to_standard(p: ConvexProgram) -> StandardForm:
    n, m = p.variable_count, p.residual_count
    a_r, b_r, w = p.residual_matrix, p.residual_offset, p.weights
    if p.objective_kind == ObjectiveKind.WEIGHTED_LEAST_SQUARES:
        weighted = a_r.T * w
        return StandardForm(
            2.0 * weighted @ a_r, -2.0 * weighted @ b_r,
            float(b_r @ (w * b_r)), p.equality_matrix, p.equality_rhs,
            p.lower, p.upper)

    # Epigraph form over [x, u, v] with A_r x - u + v = b_r.
    size = n + 2 * m
    eq_matrix = np.zeros((p.equality_matrix.shape[0] + m, size))
    eq_matrix[:p.equality_matrix.shape[0], :n] = p.equality_matrix
    eq_matrix[p.equality_matrix.shape[0]:, :n] = a_r
    eq_matrix[p.equality_matrix.shape[0]:, n:n + m] = -np.eye(m)
    eq_matrix[p.equality_matrix.shape[0]:, n + m:] = np.eye(m)
    return StandardForm(
        np.zeros((size, size)),
        np.concatenate([np.zeros(n), w, w]),
        0.0,
        eq_matrix,
        np.concatenate([p.equality_rhs, b_r]),
        np.concatenate([p.lower, np.zeros(2 * m)]),
        np.concatenate([p.upper, np.full(2 * m, np.inf)]))


def lift(p: ConvexProgram, x: FloatArray) -> FloatArray:
    """Maps a point of p into its standard form variables."""
    if p.objective_kind == ObjectiveKind.WEIGHTED_LEAST_SQUARES:
        return x
    eps = p.residual(x)
    return np.concatenate([x, np.maximum(eps, 0.0), np.maximum(-eps, 0.0)])


def independent_rows(matrix: FloatArray,
                     tolerance: float = RANK_TOLERANCE) -> IntArray:
    """Indexes of a maximal set of linearly independent rows, in order."""
    if matrix.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, r, pivots = scipy.linalg.qr(matrix.T, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    if diagonal.size == 0 or diagonal[0] == 0.0:
        return np.zeros(0, dtype=int)
    rank = int(np.sum(diagonal > tolerance * diagonal[0]))
    return np.sort(pivots[:rank])


def kkt_residual(form: StandardForm, x: FloatArray) -> float:
    g = form.gradient(x)
    scale = max(1.0, float(np.max(np.abs(g), initial=0.0)))
    primal = 0.0
    if form.eq_matrix.shape[0] > 0:
        primal = float(np.max(np.abs(form.eq_matrix @ x - form.eq_rhs)))
    primal = max(primal,
                 float(np.max(form.lower - x, initial=0.0)),
                 float(np.max(x - form.upper, initial=0.0)))

    columns = [form.eq_matrix.T]
    lo_bounds = [np.full(form.eq_matrix.shape[0], -np.inf)]
    slacks = [np.zeros(form.eq_matrix.shape[0])]
    for j in range(x.size):
        lower_slack = x[j] - form.lower[j]
        upper_slack = form.upper[j] - x[j]
        tol_j = 1e-9 * max(1.0, abs(x[j]))
        unit = np.zeros((x.size, 1))
        if form.lower[j] == form.upper[j]:
            unit[j] = 1.0
            columns.append(unit)
            lo_bounds.append(np.array([-np.inf]))
            slacks.append(np.zeros(1))
        elif lower_slack <= tol_j:
            unit[j] = -1.0
            columns.append(unit)
            lo_bounds.append(np.zeros(1))
            slacks.append(np.array([max(lower_slack, 0.0)]))
        elif upper_slack <= tol_j:
            unit[j] = 1.0
            columns.append(unit)
            lo_bounds.append(np.zeros(1))
            slacks.append(np.array([max(upper_slack, 0.0)]))
    matrix = np.hstack(columns)
    if matrix.shape[1] == 0:
        stationarity = float(np.max(np.abs(g), initial=0.0)) / scale
        return max(primal, stationarity)

    lower_mult = np.concatenate(lo_bounds)
    if np.all(np.isinf(lower_mult)):
        mult = np.linalg.lstsq(matrix, -g, rcond=None)[0]
    else:
        fit = scipy.optimize.lsq_linear(
            matrix, -g, bounds=(lower_mult, np.full(lower_mult.size, np.inf)),
            method="bvls", tol=1e-14)
        mult = fit.x
    stationarity = float(np.max(np.abs(g + matrix @ mult))) / scale
    dual = float(np.max(np.where(np.isfinite(lower_mult), -mult, 0.0),
                        initial=0.0)) / scale
    complementarity = float(np.max(np.abs(mult) * np.concatenate(slacks),
                                   initial=0.0)) / scale
    return max(primal, stationarity, max(dual, 0.0), complementarity)


def verify_kkt(p: ConvexProgram, x: FloatArray) -> float:
    if x.shape != (p.variable_count,):
        raise DimensionError(
            f"Point has shape {x.shape}, program has {p.variable_count} "
            "variables")
    return kkt_residual(to_standard(p), lift(p, x))


class ActiveSetSolver:
    tolerance: float
    max_iterations: Optional[int]
    debug: bool

    def __init__(self, tolerance: float = KKT_TOLERANCE,
                 max_iterations: Optional[int] = None,
                 debug: bool = False) -> None:
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.debug = debug

    def iteration_cap(self, size: int, rows: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return 50 * (size + rows) + 100

    def solve(self, p: ConvexProgram) -> SolveResult:
        form = to_standard(p)
        n = p.variable_count

        keep = independent_rows(form.eq_matrix)
        reduced = StandardForm(
            form.hessian, form.linear, form.constant,
            form.eq_matrix[keep], form.eq_rhs[keep], form.lower, form.upper)

        start = self.feasible_point(reduced)
        if start is None or not self.is_feasible(form, start):
            print_debug(self.debug, "solver: no feasible point")
            x_fail = np.clip(np.zeros(form.lower.size), form.lower,
                             form.upper)[:n]
            return SolveResult(x_fail, float("nan"), float("inf"),
                               SolveStatus.INFEASIBLE)

        x, status, iterations = self.minimize(reduced, start)
        solution = x[:n].copy()
        kkt = kkt_residual(form, x)
        if status == SolveStatus.OPTIMAL and kkt > self.tolerance:
            print_debug(self.debug,
                        f"solver: KKT residual {kkt:.3g} above tolerance")
            status = SolveStatus.ITERATION_LIMIT
        return SolveResult(solution, p.objective(solution), kkt, status,
                           iterations)

    def is_feasible(self, form: StandardForm, x: FloatArray) -> bool:
        scale = max(1.0, float(np.max(np.abs(form.eq_rhs), initial=0.0)))
        if form.eq_matrix.shape[0] > 0:
            gap = float(np.max(np.abs(form.eq_matrix @ x - form.eq_rhs)))
            if gap > self.tolerance * scale:
                return False
        slack = self.tolerance * np.maximum(1.0, np.abs(x))
        return bool(np.all(x >= form.lower - slack)
                    and np.all(x <= form.upper + slack))

    def feasible_point(self, form: StandardForm) -> Optional[FloatArray]:
        a, b = form.eq_matrix, form.eq_rhs
        x_clip = np.clip(np.zeros(form.lower.size), form.lower, form.upper)
        if a.shape[0] == 0:
            return x_clip
        correction = np.linalg.lstsq(a, b - a @ x_clip, rcond=None)[0]
        x_proj = x_clip + correction
        slack = 1e-12 * np.maximum(1.0, np.abs(x_proj))
        if (np.all(x_proj >= form.lower - slack)
                and np.all(x_proj <= form.upper + slack)):
            return np.clip(x_proj, form.lower, form.upper)

        # Phase 1: minimize the sum of artificials a ≥ 0 in
        # A x + diag(sign) a = b, starting from the clipped projection.
        x_start = np.clip(x_proj, form.lower, form.upper)
        gap = b - a @ x_start
        signs = np.where(gap < 0, -1.0, 1.0)
        rows, size = a.shape
        phase_one = StandardForm(
            np.zeros((size + rows, size + rows)),
            np.concatenate([np.zeros(size), np.ones(rows)]),
            0.0,
            np.hstack([a, np.diag(signs)]),
            b,
            np.concatenate([form.lower, np.zeros(rows)]),
            np.concatenate([form.upper, np.full(rows, np.inf)]))
        x_ext, status, _ = self.minimize(
            phase_one, np.concatenate([x_start, np.abs(gap)]))
        if status != SolveStatus.OPTIMAL:
            return None
        infeasibility = float(np.sum(x_ext[size:]))
        if infeasibility > self.tolerance * max(
                1.0, float(np.max(np.abs(b)))):
            return None
        x = x_ext[:size]
        # Project out the tiny artificial remainder when bounds allow it.
        if rows > 0:
            fix = np.linalg.lstsq(a, b - a @ x, rcond=None)[0]
            candidate = x + fix
            if (np.all(candidate >= form.lower)
                    and np.all(candidate <= form.upper)):
                x = candidate
        return x

    def initial_working_set(self, form: StandardForm,
                            x: FloatArray) -> IntArray:
        state = np.zeros(x.size, dtype=int)
        rank = form.eq_matrix.shape[0]
        for j in range(x.size):
            tol_j = 1e-12 * max(1.0, abs(x[j]))
            if x[j] - form.lower[j] <= tol_j:
                side = AT_LOWER
            elif form.upper[j] - x[j] <= tol_j:
                side = AT_UPPER
            else:
                continue
            state[j] = side
            if rank == 0 or form.lower[j] == form.upper[j]:
                continue
            free = np.flatnonzero(state == FREE)
            sub = form.eq_matrix[:, free]
            if free.size < rank or np.linalg.matrix_rank(sub) < rank:
                state[j] = FREE
        return state

    def minimize(self, form: StandardForm, x0: FloatArray
                 ) -> tuple[FloatArray, SolveStatus, int]:
        # pylint: disable=too-many-locals,too-many-branches,too-many-statements
        x = x0.copy()
        a = form.eq_matrix
        state = self.initial_working_set(form, x)
        for j in np.flatnonzero(state == AT_LOWER):
            x[j] = form.lower[j]
        for j in np.flatnonzero(state == AT_UPPER):
            x[j] = form.upper[j]

        cap = self.iteration_cap(x.size, a.shape[0])
        at_face_minimum = False
        for iteration in range(1, cap + 1):
            free = np.flatnonzero(state == FREE)
            g = form.gradient(x)
            g_scale = max(1.0, float(np.max(np.abs(g), initial=0.0)))

            ray = False
            step = np.zeros(free.size)
            if not at_face_minimum and free.size > 0:
                step, ray = self.face_step(form, free, g)
            step_size = float(np.max(np.abs(step), initial=0.0))
            if not ray and step_size <= 1e-13 * max(
                    1.0, float(np.max(np.abs(x), initial=0.0))):
                release = self.constraint_to_release(form, state, free, g,
                                                     g_scale)
                if release is None:
                    return (np.clip(x, form.lower, form.upper),
                            SolveStatus.OPTIMAL, iteration)
                state[release] = FREE
                at_face_minimum = False
                continue

            alpha_max = np.inf if ray else 1.0
            alpha, blocking, side = np.inf, -1, FREE
            for position, j in enumerate(free):
                p_j = step[position]
                if p_j < 0 and np.isfinite(form.lower[j]):
                    ratio = max((form.lower[j] - x[j]) / p_j, 0.0)
                    if ratio < alpha:
                        alpha, blocking, side = ratio, int(j), AT_LOWER
                elif p_j > 0 and np.isfinite(form.upper[j]):
                    ratio = max((form.upper[j] - x[j]) / p_j, 0.0)
                    if ratio < alpha:
                        alpha, blocking, side = ratio, int(j), AT_UPPER

            if blocking < 0 or alpha >= alpha_max:
                if ray:
                    return x, SolveStatus.UNBOUNDED, iteration
                x[free] += step
                at_face_minimum = True
                continue
            x[free] += alpha * step
            state[blocking] = side
            x[blocking] = (form.lower[blocking] if side == AT_LOWER
                           else form.upper[blocking])
            at_face_minimum = False

        return x, SolveStatus.ITERATION_LIMIT, cap

    def face_step(self, form: StandardForm, free: IntArray,
                  g: FloatArray) -> tuple[FloatArray, bool]:
        """Step minimizing the objective over the current face, or a
        descent ray when the objective is linear along some direction."""
        a_free = form.eq_matrix[:, free]
        if a_free.shape[0] > 0:
            basis = scipy.linalg.null_space(a_free, rcond=RANK_TOLERANCE)
        else:
            basis = np.eye(free.size)
        if basis.shape[1] == 0:
            return np.zeros(free.size), False

        h_face = basis.T @ form.hessian[np.ix_(free, free)] @ basis
        g_face = basis.T @ g[free]
        eigenvalues, vectors = np.linalg.eigh(0.5 * (h_face + h_face.T))
        curvature_tol = 1e-10 * max(
            1.0, float(np.max(np.abs(eigenvalues), initial=0.0)))
        curved = eigenvalues > curvature_tol
        flat_vectors = vectors[:, ~curved]
        flat_gradient = flat_vectors.T @ g_face
        g_scale = max(1.0, float(np.max(np.abs(g), initial=0.0)))
        if flat_gradient.size > 0 and float(
                np.max(np.abs(flat_gradient))) > 1e-11 * g_scale:
            return basis @ (-flat_vectors @ flat_gradient), True
        curved_vectors = vectors[:, curved]
        coords = (curved_vectors.T @ g_face) / eigenvalues[curved]
        return basis @ (-curved_vectors @ coords), False

    def constraint_to_release(self, form: StandardForm, state: IntArray,
                              free: IntArray, g: FloatArray,
                              g_scale: float) -> Optional[int]:
        a = form.eq_matrix
        if a.shape[0] > 0 and free.size > 0:
            multipliers = np.linalg.lstsq(a[:, free].T, -g[free],
                                          rcond=None)[0]
            reduced = g + a.T @ multipliers
        else:
            reduced = g.copy()
        worst, release = 1e-9 * g_scale, None
        for j in np.flatnonzero(state != FREE):
            if form.lower[j] == form.upper[j]:
                continue
            violation = (-reduced[j] if state[j] == AT_LOWER
                         else reduced[j])
            if violation > worst:
                worst, release = violation, int(j)
        return release


def solve(p: ConvexProgram, debug: bool = False) -> SolveResult:
    return ActiveSetSolver(debug=debug).solve(p)
