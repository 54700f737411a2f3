"""Bounded-variable revised simplex for the user-to-station assignment LP.

The LP is

    min  sum_k cost_k x_k
    s.t. sum_{k in user j} x_k = 1                      for every user j
         sum_{k in station i} demand_k x_k <= capacity_i for every station i
         0 <= x_k <= 1

with one variable per admitted (station, user) link. Capacity rows are divided
by their capacity before solving so every row has right-hand side 1.

Column layout inside the solver: structural variables, then one slack per
station row, then one artificial per user row. Row layout: user rows first,
then station rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from sparsesleep.errors import InfeasibleError, InvalidInputError, SolverError

__all__ = [
    "AssignmentLP",
    "LPSolution",
    "build_lp",
    "find_feasible_point",
    "integral_basis",
    "solve",
    "write_lp_file",
]

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-7
REFACTOR_EVERY = 64
DEGENERATE_LIMIT = 50


@dataclass(frozen=True)
class AssignmentLP:
    """One assignment LP; variables are ordered column-major over (station, user)."""

    num_stations: int
    num_users: int
    var_station: np.ndarray
    var_user: np.ndarray
    cost: np.ndarray
    demand_hz: np.ndarray
    capacity_hz: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vars(self) -> int:
        return self.var_station.shape[0]

    @property
    def variable_index(self) -> dict:
        """Map (station, user) -> flat variable index."""
        return {(int(i), int(j)): k for k, (i, j) in enumerate(zip(self.var_station, self.var_user))}

    def with_costs(self, costs) -> "AssignmentLP":
        """Same constraints, new objective. Shares the solver's cached matrices."""
        return replace(self, cost=_expand_costs(costs, self), _cache=self._cache)

    def to_matrix(self, x) -> np.ndarray:
        """Scatter a variable vector into an (M, N) matrix."""
        out = np.zeros((self.num_stations, self.num_users))
        out[self.var_station, self.var_user] = x
        return out

    def from_matrix(self, mat) -> np.ndarray:
        return np.asarray(mat, dtype=float)[self.var_station, self.var_user]

    def residuals(self, x):
        """(max |user sum - 1|, max scaled capacity excess, max bound violation)."""
        x = np.asarray(x, dtype=float)
        user_sum = np.bincount(self.var_user, weights=x, minlength=self.num_users)
        load = np.bincount(self.var_station, weights=self.demand_hz * x, minlength=self.num_stations)
        eq = float(np.max(np.abs(user_sum - 1.0))) if self.num_users else 0.0
        cap = float(np.max(load / self.capacity_hz - 1.0, initial=0.0))
        box = float(max(np.max(-x, initial=0.0), np.max(x - 1.0, initial=0.0)))
        return eq, max(cap, 0.0), box

    def is_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        return max(self.residuals(x)) <= tol

    def dense_constraints(self):
        """(A_eq, b_eq, A_ub, b_ub) with capacity rows scaled to right-hand side 1."""
        n = self.num_vars
        a_eq = np.zeros((self.num_users, n))
        a_eq[self.var_user, np.arange(n)] = 1.0
        a_ub = np.zeros((self.num_stations, n))
        a_ub[self.var_station, np.arange(n)] = self.demand_hz / self.capacity_hz[self.var_station]
        return a_eq, np.ones(self.num_users), a_ub, np.ones(self.num_stations)


@dataclass
class LPSolution:
    w: np.ndarray
    objective: float
    status: str
    iterations: int = 0
    basis: Optional[tuple] = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _expand_costs(costs, lp_or_shape) -> np.ndarray:
    if isinstance(lp_or_shape, AssignmentLP):
        m, n = lp_or_shape.num_stations, lp_or_shape.num_users
        rows, cols = lp_or_shape.var_station, lp_or_shape.var_user
    else:
        m, n, rows, cols = lp_or_shape
    c = np.asarray(costs, dtype=float)
    if c.ndim == 0:
        c = np.full((m, n), float(c))
    elif c.shape == (m,):
        c = np.repeat(c[:, None], n, axis=1)
    elif c.shape != (m, n):
        raise InvalidInputError(f"costs must be scalar, ({m},) or ({m}, {n}); got {c.shape}")
    if not np.all(np.isfinite(c[rows, cols])):
        raise InvalidInputError("costs must be finite")
    return c[rows, cols].copy()


def build_lp(link, capacities, costs=1.0) -> AssignmentLP:
    """Assemble the assignment LP over all links with finite bandwidth demand.

    ``link`` is a LinkMatrix (only ``demand`` is used); ``costs`` may be a
    scalar, a per-station vector or a full (M, N) matrix.
    """
    demand = np.asarray(link.demand, dtype=float)
    if demand.ndim != 2:
        raise InvalidInputError("demand must be a matrix")
    m, n = demand.shape
    cap = np.broadcast_to(np.asarray(capacities, dtype=float), (m,)).copy()
    if cap.shape != (m,) or not np.all(cap > 0) or not np.all(np.isfinite(cap)):
        raise InvalidInputError("capacities must be M positive finite values")
    admitted = np.isfinite(demand)
    if np.any(demand[admitted] <= 0):
        raise InvalidInputError("bandwidth demands must be positive")
    missing = np.flatnonzero(~admitted.any(axis=0))
    if missing.size:
        raise InfeasibleError(f"users {missing.tolist()} have no admissible station")
    # column-major: flat index i + M*j
    cols, rows = np.nonzero(admitted.T)
    return AssignmentLP(
        num_stations=m,
        num_users=n,
        var_station=rows,
        var_user=cols,
        cost=_expand_costs(costs, (m, n, rows, cols)),
        demand_hz=demand[rows, cols].copy(),
        capacity_hz=cap,
    )


def _standard_form(lp: AssignmentLP):
    """Sparse [A_struct | slack | artificial] in CSC and its CSR transpose."""
    if "A" in lp._cache:
        return lp._cache["A"], lp._cache["AT"]
    n, m_st, n_us = lp.num_vars, lp.num_stations, lp.num_users
    k = np.arange(n)
    rows = np.concatenate([lp.var_user, n_us + lp.var_station,
                           n_us + np.arange(m_st), np.arange(n_us)])
    cols = np.concatenate([k, k, n + np.arange(m_st), n + m_st + np.arange(n_us)])
    vals = np.concatenate([np.ones(n), lp.demand_hz / lp.capacity_hz[lp.var_station],
                           np.ones(m_st), np.ones(n_us)])
    a = sp.csc_matrix((vals, (rows, cols)), shape=(n_us + m_st, n + m_st + n_us))
    a.sort_indices()
    lp._cache["A"] = a
    lp._cache["AT"] = a.T.tocsr()
    return lp._cache["A"], lp._cache["AT"]


class _Simplex:
    """Revised simplex with bounds, explicit basis inverse and eta updates."""

    def __init__(self, lp: AssignmentLP, max_iter: Optional[int] = None):
        self.lp = lp
        self.A, self.AT = _standard_form(lp)
        self.m, self.ntot = self.A.shape
        self.n = lp.num_vars
        self.first_art = self.n + lp.num_stations
        self.b = np.ones(self.m)
        self.upper = np.concatenate([np.ones(self.n), np.full(lp.num_stations, np.inf),
                                     np.full(lp.num_users, np.inf)])
        self.max_iter = max_iter or 50 * (self.m + self.ntot) + 1000
        self.iterations = 0
        # identity start: artificials on user rows, slacks on station rows
        order = np.empty(self.m, dtype=int)
        order[lp.num_users + np.arange(lp.num_stations)] = self.n + np.arange(lp.num_stations)
        order[np.arange(lp.num_users)] = self.first_art + np.arange(lp.num_users)
        self.basis = order
        self.at_upper = np.zeros(self.ntot, dtype=bool)
        self.is_basic = np.zeros(self.ntot, dtype=bool)
        self.is_basic[self.basis] = True
        self.refactor()

    # -- linear algebra -------------------------------------------------

    def refactor(self):
        B = self.A[:, self.basis].toarray()
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis") from exc
        self.since_refactor = 0
        self._recompute_xb()

    def _recompute_xb(self):
        xn = np.where(self.at_upper & ~self.is_basic, self.upper, 0.0)
        xn[~np.isfinite(xn)] = 0.0
        self.xB = self.Binv @ (self.b - self.A @ xn)

    def _column(self, q):
        lo, hi = self.A.indptr[q], self.A.indptr[q + 1]
        return self.Binv[:, self.A.indices[lo:hi]] @ self.A.data[lo:hi]

    def values(self) -> np.ndarray:
        x = np.where(self.at_upper, self.upper, 0.0)
        x[~np.isfinite(x)] = 0.0
        x[self.basis] = self.xB
        return x

    # -- warm start -----------------------------------------------------

    def load_basis(self, state) -> bool:
        """Install a saved basis; returns False (and keeps the current one) if unusable."""
        basis, at_upper = state
        if len(basis) != self.m or len(at_upper) != self.ntot:
            return False
        old = (self.basis.copy(), self.at_upper.copy(), self.is_basic.copy(), self.Binv, self.xB)
        self.basis = np.array(basis, dtype=int)
        self.at_upper = np.array(at_upper, dtype=bool)
        self.is_basic[:] = False
        self.is_basic[self.basis] = True
        self.at_upper[self.basis] = False
        try:
            self.refactor()
        except SolverError:
            ok = False
        else:
            lo_ok = np.all(self.xB >= -FEASIBILITY_TOL)
            hi_ok = np.all(self.xB <= self.upper[self.basis] + FEASIBILITY_TOL)
            art = self.basis >= self.first_art
            ok = bool(lo_ok and hi_ok and np.all(self.xB[art] <= FEASIBILITY_TOL)
                      and not np.any(self.at_upper[self.first_art:]))
        if not ok:
            self.basis, self.at_upper, self.is_basic, self.Binv, self.xB = old
        return ok

    def state(self):
        return (tuple(int(v) for v in self.basis), tuple(bool(v) for v in self.at_upper))

    # -- main loop --------------------------------------------------------

    def iterate(self, cost: np.ndarray):
        """Run primal simplex on ``cost`` from the current feasible basis."""
        dual_tol = DUAL_TOL * max(1.0, float(np.max(np.abs(cost))))
        degenerate_run = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise SolverError(f"simplex iteration cap {self.max_iter} reached")
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()

            y = cost[self.basis] @ self.Binv
            d = cost - self.AT @ y
            movable = ~self.is_basic & (self.upper > 0)
            gain = np.where(self.at_upper, d, -d)
            gain[~movable] = 0.0
            candidates = gain > dual_tol
            if not candidates.any():
                return
            if bland:
                q = int(np.argmax(candidates))
            else:
                q = int(np.argmax(gain))
            sigma = -1.0 if self.at_upper[q] else 1.0
            alpha = self._column(q)
            delta = sigma * alpha
            r, step = self._ratio_test(delta, bland)

            flip = self.upper[q]
            if r < 0 and not np.isfinite(flip):
                raise SolverError("LP is unbounded")
            self.iterations += 1
            if r < 0 or flip <= step:
                # bound flip, basis unchanged
                self.xB -= flip * delta
                self.at_upper[q] = not self.at_upper[q]
                step = flip
            else:
                self._pivot(q, r, step, sigma, alpha, delta)

            if step <= 1e-12:
                degenerate_run += 1
                if degenerate_run > DEGENERATE_LIMIT:
                    bland = True
            else:
                degenerate_run = 0
                bland = False

    def _ratio_test(self, delta, bland):
        """Return (leaving row or -1, step length). Harris two-pass unless ``bland``."""
        ub = self.upper[self.basis]
        dec = delta > PIVOT_TOL
        inc = (delta < -PIVOT_TOL) & np.isfinite(ub)
        if not (dec.any() or inc.any()):
            return -1, np.inf
        exact = np.full(self.m, np.inf)
        exact[dec] = self.xB[dec] / delta[dec]
        exact[inc] = (ub[inc] - self.xB[inc]) / -delta[inc]
        exact = np.maximum(exact, 0.0)
        if bland:
            tmin = exact.min()
            ties = np.flatnonzero(exact <= tmin + 1e-12)
            r = int(ties[np.argmin(self.basis[ties])])
            return r, float(exact[r])
        relaxed = np.full(self.m, np.inf)
        relaxed[dec] = (self.xB[dec] + PRIMAL_TOL) / delta[dec]
        relaxed[inc] = (ub[inc] - self.xB[inc] + PRIMAL_TOL) / -delta[inc]
        # a basic value drifted below -tol gives a negative bound; exact ratios are >= 0
        tmax = max(relaxed.min(), 0.0)
        ok = np.flatnonzero(exact <= tmax)
        r = int(ok[np.argmax(np.abs(delta[ok]))])
        return r, float(exact[r])

    def _pivot(self, q, r, step, sigma, alpha, delta):
        leaving = self.basis[r]
        hits_upper = delta[r] < 0
        entering_value = step if sigma > 0 else self.upper[q] - step
        self.xB -= step * delta
        self.xB[r] = entering_value
        self.at_upper[leaving] = bool(hits_upper)
        self.at_upper[q] = False
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q

        piv = alpha[r]
        if abs(piv) < PIVOT_TOL:
            raise SolverError("pivot element too small")
        row = self.Binv[r] / piv
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row
        self.since_refactor += 1

    # -- phases -----------------------------------------------------------

    def phase_one(self) -> bool:
        cost = np.zeros(self.ntot)
        cost[self.first_art:] = 1.0
        self.iterate(cost)
        self.refactor()
        infeas = float(np.sum(self.values()[self.first_art:]))
        self.upper[self.first_art:] = 0.0
        return infeas <= FEASIBILITY_TOL

    def close_artificials(self):
        self.upper[self.first_art:] = 0.0

    def structural(self) -> np.ndarray:
        self.refactor()
        return np.clip(self.values()[: self.n], 0.0, 1.0)


def integral_basis(lp: AssignmentLP, x) -> tuple:
    """Warm-start state for a 0/1 point: ones sit at their upper bound, slacks and
    zero-level artificials form the basis."""
    x = np.asarray(x, dtype=float)
    n, m_st, n_us = lp.num_vars, lp.num_stations, lp.num_users
    basis = np.empty(n_us + m_st, dtype=int)
    basis[:n_us] = n + m_st + np.arange(n_us)
    basis[n_us:] = n + np.arange(m_st)
    at_upper = np.zeros(n + m_st + n_us, dtype=bool)
    at_upper[:n] = x > 0.5
    return (tuple(int(v) for v in basis), tuple(bool(v) for v in at_upper))


def _finish(lp, smp, x) -> LPSolution:
    if not lp.is_feasible(x):
        raise SolverError(f"simplex returned an infeasible point, residuals {lp.residuals(x)}")
    return LPSolution(w=x, objective=float(lp.cost @ x), status=OPTIMAL,
                      iterations=smp.iterations, basis=smp.state())


def _infeasible(lp, smp) -> LPSolution:
    return LPSolution(w=np.full(lp.num_vars, np.nan), objective=np.inf, status=INFEASIBLE,
                      iterations=smp.iterations)


def find_feasible_point(lp: AssignmentLP) -> LPSolution:
    """Phase-one solve: any feasible point, or an infeasible status."""
    smp = _Simplex(lp)
    if not smp.phase_one():
        return _infeasible(lp, smp)
    return _finish(lp, smp, smp.structural())


def solve(lp: AssignmentLP, warm_start=None, backend: str = "simplex",
          max_iter: Optional[int] = None) -> LPSolution:
    """Optimal basic solution of ``lp``.

    ``warm_start`` is the ``basis`` of an earlier solution of an LP with the
    same constraints; if it is still primal feasible phase one is skipped.
    ``backend="highs"`` delegates to SciPy's HiGHS for cross-checking.
    """
    if backend == "highs":
        return _solve_highs(lp)
    if backend != "simplex":
        raise InvalidInputError(f"unknown LP backend {backend!r}")
    smp = _Simplex(lp, max_iter=max_iter)
    if warm_start is not None and smp.load_basis(warm_start):
        smp.close_artificials()
    elif not smp.phase_one():
        return _infeasible(lp, smp)
    cost = np.zeros(smp.ntot)
    cost[: lp.num_vars] = lp.cost
    smp.iterate(cost)
    return _finish(lp, smp, smp.structural())


def _solve_highs(lp: AssignmentLP) -> LPSolution:
    from scipy.optimize import linprog

    a_eq, b_eq, a_ub, b_ub = lp.dense_constraints()
    res = linprog(lp.cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=(0.0, 1.0), method="highs")
    if res.status == 2:
        return LPSolution(w=np.full(lp.num_vars, np.nan), objective=np.inf, status=INFEASIBLE)
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    x = np.clip(res.x, 0.0, 1.0)
    return LPSolution(w=x, objective=float(lp.cost @ x), status=OPTIMAL, iterations=int(res.nit))


def write_lp_file(lp: AssignmentLP, path) -> None:
    """Dump ``lp`` in CPLEX LP text format.

    Variables are named ``x_<station>_<user>``; capacity rows are written in
    Hz (unscaled) so the file can be fed to any external LP solver as is.
    """
    names = [f"x_{i}_{j}" for i, j in zip(lp.var_station, lp.var_user)]
    lines = ["\\ assignment LP", "Minimize", " obj:"]
    lines += [f"  {c:+.17g} {v}" for c, v in zip(lp.cost, names)]
    lines.append("Subject To")
    for j in range(lp.num_users):
        terms = " ".join(f"+ {names[k]}" for k in np.flatnonzero(lp.var_user == j))
        lines.append(f" user_{j}: {terms} = 1")
    for i in range(lp.num_stations):
        ks = np.flatnonzero(lp.var_station == i)
        if not ks.size:
            continue
        terms = " ".join(f"{lp.demand_hz[k]:+.17g} {names[k]}" for k in ks)
        lines.append(f" cap_{i}: {terms} <= {lp.capacity_hz[i]:.17g}")
    lines.append("Bounds")
    lines += [f" 0 <= {v} <= 1" for v in names]
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
