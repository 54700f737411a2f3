"""Map a fractional connection matrix to a binary, capacity-feasible user assignment."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from sparsesleep.errors import InfeasibleError, InvalidInputError

__all__ = [
    "BinaryAssignment",
    "EnergyReport",
    "INTEGRALITY_TOL",
    "energy_of",
    "round_assignment",
]

logger = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-6
CAPACITY_SLACK = 1e-9


@dataclass(frozen=True)
class BinaryAssignment:
    """Each user served by exactly one station (indices into the topology)."""

    assigned_station: np.ndarray
    active_set: frozenset
    residual_bandwidth_hz: np.ndarray

    @property
    def active_count(self) -> int:
        return len(self.active_set)

    @classmethod
    def from_stations(cls, stations, link, capacities) -> "BinaryAssignment":
        """Build from a station-per-user vector, computing residual bandwidth."""
        stations = np.asarray(stations, dtype=int)
        m, n = link.shape
        if stations.shape != (n,) or np.any(stations < 0) or np.any(stations >= m):
            raise InvalidInputError("every user needs a valid station index")
        cap = np.array(np.broadcast_to(np.asarray(capacities, float), (m,)))
        used = np.bincount(stations, weights=link.demand[stations, np.arange(n)], minlength=m)
        return cls(
            assigned_station=stations,
            active_set=frozenset(int(i) for i in np.unique(stations)),
            residual_bandwidth_hz=cap - used,
        )

    def to_matrix(self, num_stations: int) -> np.ndarray:
        x = np.zeros((num_stations, self.assigned_station.shape[0]))
        x[self.assigned_station, np.arange(self.assigned_station.shape[0])] = 1.0
        return x

    def violations(self, link, capacities) -> list:
        """Human-readable list of broken constraints (empty when feasible)."""
        m, n = link.shape
        cap = np.broadcast_to(np.asarray(capacities, float), (m,))
        out = []
        if self.assigned_station.shape != (n,):
            return ["assignment length does not match the user count"]
        if np.any(self.assigned_station < 0):
            out.append("some users are unassigned")
            return out
        load = np.bincount(self.assigned_station,
                           weights=link.demand[self.assigned_station, np.arange(n)], minlength=m)
        for i in np.flatnonzero(load > cap * (1.0 + CAPACITY_SLACK)):
            out.append(f"station {i} over capacity: {load[i]:.6g} > {cap[i]:.6g} Hz")
        if set(self.active_set) != set(int(i) for i in np.unique(self.assigned_station)):
            out.append("active set does not match the stations in use")
        return out


@dataclass(frozen=True)
class EnergyReport:
    total_power_w: float
    active_count: int


def energy_of(assignment: BinaryAssignment, topology) -> EnergyReport:
    """Static power of the active stations."""
    active = sorted(assignment.active_set)
    return EnergyReport(
        total_power_w=float(np.sum(topology.static_power_w[active])) if active else 0.0,
        active_count=len(active),
    )


def round_assignment(w, link, topology, leftover_policy: str = "reuse") -> BinaryAssignment:
    """Three-stage rounding of a relaxed assignment.

    1. Users whose column is already 0/1 keep their station.
    2. Remaining users, taken in descending order of their largest fractional
       entry, go to the station with the largest entry that still has room.
    3. Users left over switch on the closest sleeping station with room. If no
       sleeping station can host them, the active station with the most spare
       bandwidth that fits is used instead. If nothing fits, one already placed
       user is relocated to make room before giving up.

    With ``leftover_policy="reuse"`` (default) stage 3 first tries the already
    active stations, most spare bandwidth first, and only then wakes a sleeping
    one; ``"activate"`` always wakes a station first.

    ``w`` is a RelaxedAssignment or an (M, N) array.
    """
    if leftover_policy not in ("reuse", "activate"):
        raise InvalidInputError(f"unknown leftover_policy {leftover_policy!r}")
    x = np.asarray(getattr(w, "matrix", w), dtype=float)
    m, n = link.shape
    if x.shape != (m, n):
        raise InvalidInputError(f"relaxed assignment has shape {x.shape}, expected {(m, n)}")
    cap = np.asarray(topology.bandwidth_hz, dtype=float)
    slack = CAPACITY_SLACK * cap
    demand = link.demand
    residual = cap.copy()
    assigned = np.full(n, -1, dtype=int)

    def fits(i, j):
        return np.isfinite(demand[i, j]) and demand[i, j] <= residual[i] + slack[i]

    def take(i, j):
        residual[i] -= demand[i, j]
        assigned[j] = i

    near_zero = x <= INTEGRALITY_TOL
    near_one = x >= 1.0 - INTEGRALITY_TOL
    integral_cols = np.all(near_zero | near_one, axis=0) & (near_one.sum(axis=0) == 1)

    leftover = []
    for j in np.flatnonzero(integral_cols):
        i = int(np.argmax(x[:, j]))
        if fits(i, j):
            take(i, j)
        else:
            # cannot happen for LP-feasible input beyond tolerance noise
            logger.warning("integral entry (%d, %d) exceeds capacity; deferring user", i, j)
            leftover.append(int(j))

    frac_users = np.flatnonzero(~integral_cols)
    frac = np.where((x > INTEGRALITY_TOL) & (x < 1.0 - INTEGRALITY_TOL), x, 0.0)
    top = frac[:, frac_users].max(axis=0) if frac_users.size else np.zeros(0)
    # descending by largest entry, ties to the lower user index
    for j in frac_users[np.lexsort((frac_users, -top))]:
        stations = np.flatnonzero(frac[:, j] > 0)
        stations = stations[np.lexsort((stations, -frac[stations, j]))]
        for i in stations:
            if fits(i, j):
                take(i, j)
                break
        else:
            leftover.append(int(j))

    for j in sorted(leftover):
        active = np.zeros(m, dtype=bool)
        active[assigned[assigned >= 0]] = True
        sleeping = np.flatnonzero(~active)
        sleeping = sleeping[np.argsort(link.distance_m[sleeping, j], kind="stable")]
        awake = np.flatnonzero(active)
        awake = awake[np.lexsort((awake, -residual[awake]))]
        order = [awake, sleeping] if leftover_policy == "reuse" else [sleeping, awake]
        candidates = np.concatenate(order)
        for i in candidates:
            if fits(i, j):
                take(i, j)
                break
        else:
            if not _relocate_one(j, candidates, assigned, residual, demand, slack, fits, take):
                raise InfeasibleError(f"user {j} cannot be hosted by any station")

    return BinaryAssignment(
        assigned_station=assigned,
        active_set=frozenset(int(i) for i in np.unique(assigned)),
        residual_bandwidth_hz=residual,
    )


def _relocate_one(j, stations, assigned, residual, demand, slack, fits, take) -> bool:
    """Make room for user ``j`` by moving a single placed user elsewhere.

    Only used when no station can take ``j`` directly. Stations are tried in
    the given order; on each, the placed users are tried largest demand first.
    """
    for i in stations:
        if not np.isfinite(demand[i, j]):
            continue
        need = demand[i, j] - residual[i] - slack[i]
        if demand[i, j] > residual[i] + slack[i] + np.sum(demand[i, assigned == i]):
            continue
        movers = np.flatnonzero(assigned == i)
        movers = movers[np.lexsort((movers, -demand[i, movers]))]
        for k in movers:
            if demand[i, k] < need:
                break
            for i2 in stations:
                if i2 == i:
                    continue
                if fits(i2, k):
                    residual[i] += demand[i, k]
                    take(i2, k)
                    take(i, j)
                    return True
    return False
