"""Comparison solvers and an exact oracle for desk-sized instances."""

from __future__ import annotations

import itertools
import logging
from typing import List, Optional

import numpy as np

from sparsesleep import lp as lpmod
from sparsesleep.errors import InfeasibleError, SizeLimitError
from sparsesleep.mm import greedy_nearest
from sparsesleep.rounding import CAPACITY_SLACK, BinaryAssignment, round_assignment

__all__ = [
    "MAX_BRUTE_FORCE_STATIONS",
    "MAX_BRUTE_FORCE_USERS",
    "brute_force_optimum",
    "greedy_switchoff",
    "nearest_station_solution",
]

logger = logging.getLogger(__name__)

MAX_BRUTE_FORCE_STATIONS = 6
MAX_BRUTE_FORCE_USERS = 10


def _assign_within(subset, demand, cap):
    """Exact search for an assignment of every user to ``subset``; None if impossible.

    Depth-first over users (fewest options first), pruning when the smallest
    remaining demands cannot fit in the remaining total bandwidth.
    """
    n = demand.shape[1]
    sub = np.asarray(subset)
    d = demand[sub]
    limit = cap[sub] * (1.0 + CAPACITY_SLACK)
    options = [np.flatnonzero(d[:, j] <= limit) for j in range(n)]
    if any(len(o) == 0 for o in options):
        return None
    order = sorted(range(n), key=lambda j: (len(options[j]), j))
    min_dem = np.array([d[options[j], j].min() for j in order])
    tail_min = np.concatenate([np.cumsum(min_dem[::-1])[::-1], [0.0]])
    residual = limit.copy()
    choice = np.full(n, -1, dtype=int)

    def dfs(pos):
        if pos == n:
            return True
        if tail_min[pos] > residual.sum():
            return False
        j = order[pos]
        for k in options[j]:
            if d[k, j] <= residual[k]:
                residual[k] -= d[k, j]
                choice[j] = k
                if dfs(pos + 1):
                    return True
                residual[k] += d[k, j]
        return False

    if not dfs(0):
        return None
    return sub[choice]


def brute_force_optimum(link, capacities):
    """Minimum number of active stations, by exhaustive search.

    Station subsets are scanned by increasing size, so the first subset that
    admits a complete assignment is optimal. Returns (count, BinaryAssignment).
    """
    m, n = link.shape
    if m > MAX_BRUTE_FORCE_STATIONS or n > MAX_BRUTE_FORCE_USERS:
        raise SizeLimitError(
            f"brute force handles at most {MAX_BRUTE_FORCE_STATIONS} stations and "
            f"{MAX_BRUTE_FORCE_USERS} users, got {m}x{n}")
    cap = np.array(np.broadcast_to(np.asarray(capacities, float), (m,)))
    demand = np.asarray(link.demand, dtype=float)
    for k in range(1, m + 1):
        for subset in itertools.combinations(range(m), k):
            stations = _assign_within(subset, demand, cap)
            if stations is not None:
                return k, BinaryAssignment.from_stations(stations, link, cap)
    raise InfeasibleError("no assignment satisfies all constraints even with every station on")


def nearest_station_solution(link, topology, users=None) -> BinaryAssignment:
    """Each user on its closest station with room (spillover in user order).

    If the greedy pass strands a user, a phase-one LP point is rounded instead,
    mirroring the MM initialization.
    """
    stations = greedy_nearest(link, topology.bandwidth_hz)
    if np.all(stations >= 0):
        return BinaryAssignment.from_stations(stations, link, topology.bandwidth_hz)
    lp = lpmod.build_lp(link, topology.bandwidth_hz)
    sol = lpmod.find_feasible_point(lp)
    if not sol.optimal:
        raise InfeasibleError("no assignment satisfies all rate and bandwidth constraints")
    return round_assignment(lp.to_matrix(sol.w), link, topology)


def greedy_switchoff(link, topology, users=None, history: Optional[List[int]] = None,
                     start: Optional[BinaryAssignment] = None) -> BinaryAssignment:
    """Greedy station switch-off, used as the cell-zooming style comparator.

    Starting from the nearest-station solution, the active station carrying
    the least bandwidth is offered for shutdown: each of its users (in index
    order) moves to the other active station with the highest spectral
    efficiency that still has room. The move is committed only if all users
    find a new home; otherwise the next-lightest station is tried. Stops when
    no active station can be emptied. Deactivated stations are appended to
    ``history`` in order.
    """
    m, n = link.shape
    cap = np.asarray(topology.bandwidth_hz, dtype=float)
    slack = CAPACITY_SLACK * cap
    current = start if start is not None else nearest_station_solution(link, topology, users)
    stations = current.assigned_station.copy()
    demand = link.demand
    eff = link.spec_eff
    users_idx = np.arange(n)

    while True:
        used = np.bincount(stations, weights=demand[stations, users_idx], minlength=m)
        active = np.zeros(m, dtype=bool)
        active[stations] = True
        act = np.flatnonzero(active)
        candidates = act[np.lexsort((act, used[act]))]
        moved = False
        for s in candidates:
            others = act[act != s]
            if not others.size:
                break
            residual = cap - used
            trial = stations.copy()
            ok = True
            for j in np.flatnonzero(stations == s):
                targets = others[np.lexsort((others, -eff[others, j]))]
                for i in targets:
                    if np.isfinite(demand[i, j]) and demand[i, j] <= residual[i] + slack[i]:
                        residual[i] -= demand[i, j]
                        trial[j] = i
                        break
                else:
                    ok = False
                    break
            if ok:
                stations = trial
                if history is not None:
                    history.append(int(s))
                moved = True
                break
        if not moved:
            return BinaryAssignment.from_stations(stations, link, cap)
