"""Majorization-minimization over the log-sum relaxation of the active-station count.

The relaxed objective is f(w) = sum_i log(eps + load_i(w)), where load_i is
station i's row sum of the (M, N) connection matrix. f is concave, so its
tangent plane majorizes it and each MM step is an LP with per-station weights
1 / (eps + load_i) taken at the current iterate.

Vectors ``w`` are column-major vectorizations of the (M, N) matrix: entry
``i + M*j`` is the share of user j on station i.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from sparsesleep import lp as lpmod
from sparsesleep.errors import InfeasibleError, InvalidInputError, SolverError

__all__ = [
    "ACTIVITY_THRESHOLD",
    "MMConfig",
    "RelaxedAssignment",
    "SolveTrace",
    "gradient",
    "greedy_nearest",
    "has_converged",
    "initialize",
    "l0_relaxation_value",
    "mm_step",
    "objective",
    "run",
    "surrogate",
]

logger = logging.getLogger(__name__)

ACTIVITY_THRESHOLD = 1e-6
CAPACITY_SLACK = 1e-9


@dataclass(frozen=True)
class MMConfig:
    epsilon: float = 1e-3
    epsilon_star: float = 1e-3
    max_iters: int = 20

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be > 0")
        if not self.epsilon_star > 0:
            raise InvalidInputError("epsilon_star must be > 0")
        if int(self.max_iters) < 1:
            raise InvalidInputError("max_iters must be >= 1")


@dataclass
class RelaxedAssignment:
    """Fractional connection matrix X with entries in [0, 1], shape (M, N)."""

    matrix: np.ndarray
    lp_basis: Optional[tuple] = field(default=None, repr=False)
    lp_iterations: int = 0

    @property
    def w(self) -> np.ndarray:
        return self.matrix.ravel(order="F")

    @property
    def station_load(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def active_count(self, threshold: float = ACTIVITY_THRESHOLD) -> int:
        return int(np.sum(self.station_load > threshold))

    @classmethod
    def from_vector(cls, w, num_stations: int, num_users: int) -> "RelaxedAssignment":
        return cls(np.asarray(w, dtype=float).reshape((num_stations, num_users), order="F").copy())


@dataclass
class SolveTrace:
    """Per-iteration record; index 0 is the initial point."""

    objective_per_iter: List[float] = field(default_factory=list)
    active_count_per_iter: List[int] = field(default_factory=list)
    lp_iterations: List[int] = field(default_factory=list)
    w_per_iter: Optional[List[np.ndarray]] = None
    iterations_used: int = 0
    termination_reason: str = ""

    def rows(self):
        """(iteration, objective, active_count) tuples."""
        return list(zip(range(len(self.objective_per_iter)), self.objective_per_iter,
                        self.active_count_per_iter))


def _row_sums(w, num_stations, num_users):
    w = np.asarray(w, dtype=float)
    if w.shape != (num_stations * num_users,):
        raise InvalidInputError(f"w must have length M*N = {num_stations * num_users}")
    return w.reshape((num_stations, num_users), order="F").sum(axis=1)


def objective(w, epsilon: float, num_stations: int, num_users: int) -> float:
    """sum_i ln(epsilon + row_sum_i(w))."""
    return float(np.sum(np.log(epsilon + _row_sums(w, num_stations, num_users))))


def gradient(w, epsilon: float, num_stations: int, num_users: int) -> np.ndarray:
    """Component (i, j) is 1 / (epsilon + row_sum_i(w)), independent of j."""
    per_station = 1.0 / (epsilon + _row_sums(w, num_stations, num_users))
    return np.tile(per_station, num_users)


def surrogate(x, y, epsilon: float, num_stations: int, num_users: int) -> float:
    """Tangent-plane majorizer g(x, y) = f(y) + grad f(y) . (x - y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return objective(y, epsilon, num_stations, num_users) + float(
        gradient(y, epsilon, num_stations, num_users) @ (x - y))


def l0_relaxation_value(h, epsilon: float) -> float:
    """sum_i log(1 + |h_i|/epsilon) / log(1 + 1/epsilon); tends to ||h||_0 as epsilon -> 0."""
    h = np.abs(np.asarray(h, dtype=float))
    return float(np.sum(np.log1p(h / epsilon)) / np.log1p(1.0 / epsilon))


def has_converged(f_prev: Optional[float], f_curr: float, epsilon_star: float) -> bool:
    if f_prev is None:
        return False
    return f_prev - f_curr < epsilon_star


def greedy_nearest(link, capacities) -> np.ndarray:
    """Nearest-station assignment with spillover, users in index order.

    Each user takes the closest station (by ``link.distance_m``, ties to the
    lower index) whose remaining bandwidth covers its demand. Returns the
    station per user, -1 where no station had room.
    """
    m, n = link.shape
    residual = np.array(np.broadcast_to(np.asarray(capacities, float), (m,)))
    slack = CAPACITY_SLACK * residual
    out = np.full(n, -1, dtype=int)
    for j in range(n):
        b = link.demand[:, j]
        for i in np.argsort(link.distance_m[:, j], kind="stable"):
            if np.isfinite(b[i]) and b[i] <= residual[i] + slack[i]:
                residual[i] -= b[i]
                out[j] = i
                break
    return out


def initialize(link, topology, users=None) -> RelaxedAssignment:
    """Feasible starting point: nearest station with room, else an LP phase-one point."""
    m, n = link.shape
    choice = greedy_nearest(link, topology.bandwidth_hz)
    lp = lpmod.build_lp(link, topology.bandwidth_hz)
    if np.all(choice >= 0):
        x = np.zeros((m, n))
        x[choice, np.arange(n)] = 1.0
        return RelaxedAssignment(x, lp_basis=lpmod.integral_basis(lp, lp.from_matrix(x)))
    logger.info("greedy start failed for %d users; using a phase-one LP point",
                int(np.sum(choice < 0)))
    sol = lpmod.find_feasible_point(lp)
    if not sol.optimal:
        raise InfeasibleError("no assignment satisfies all rate and bandwidth constraints")
    return RelaxedAssignment(lp.to_matrix(sol.w), lp_basis=sol.basis)


def mm_step(w_n: RelaxedAssignment, link, capacities, epsilon: float,
            lp: Optional[lpmod.AssignmentLP] = None) -> RelaxedAssignment:
    """One MM update: minimize the weighted load sum_i load_i / (eps + load_i(w_n))."""
    weights = 1.0 / (epsilon + w_n.station_load)
    if lp is None:
        lp = lpmod.build_lp(link, capacities, weights)
    else:
        lp = lp.with_costs(weights)
    sol = lpmod.solve(lp, warm_start=w_n.lp_basis)
    if not sol.optimal:
        # the constraint set does not change between steps
        raise SolverError("MM step LP reported infeasible from a feasible iterate")
    return RelaxedAssignment(lp.to_matrix(sol.w), lp_basis=sol.basis, lp_iterations=sol.iterations)


def run(link, topology, users, cfg: MMConfig = MMConfig(), keep_iterates: bool = False,
        ignore_tolerance: bool = False):
    """Iterate MM steps from the nearest-station start.

    Stops once the objective decrease drops below ``cfg.epsilon_star`` or after
    ``cfg.max_iters`` steps. ``ignore_tolerance`` always runs all steps (the
    trace still records where the tolerance was first met via
    ``termination_reason``). Returns (final RelaxedAssignment, SolveTrace).
    """
    m, n = link.shape
    eps = cfg.epsilon
    w = initialize(link, topology, users)
    lp = lpmod.build_lp(link, topology.bandwidth_hz)

    trace = SolveTrace(w_per_iter=[] if keep_iterates else None)
    f_prev = objective(w.w, eps, m, n)
    trace.objective_per_iter.append(f_prev)
    trace.active_count_per_iter.append(w.active_count())
    if keep_iterates:
        trace.w_per_iter.append(w.w.copy())

    reason = "max_iters"
    final = w
    for it in range(1, int(cfg.max_iters) + 1):
        w = mm_step(w, link, topology.bandwidth_hz, eps, lp=lp)
        f_curr = objective(w.w, eps, m, n)
        trace.objective_per_iter.append(f_curr)
        trace.active_count_per_iter.append(w.active_count())
        trace.lp_iterations.append(w.lp_iterations)
        if keep_iterates:
            trace.w_per_iter.append(w.w.copy())
        logger.debug("MM iteration %d: f=%.6f active=%d", it, f_curr, w.active_count())
        converged = has_converged(f_prev, f_curr, cfg.epsilon_star)
        if converged and reason != "tolerance":
            reason = "tolerance"
            if not ignore_tolerance:
                trace.iterations_used = it
                final = w
                break
        f_prev = f_curr
        trace.iterations_used = it
        final = w
    trace.termination_reason = reason
    return final, trace
