"""Plain-text import/export.

Scenario files are whitespace separated, one record per line, ``#`` comments:

    topology:  id x_m y_m bandwidth_hz static_power_w
    users:     id x_m y_m rate_bps

A ``# extent <x> <y>`` line carries the torus size. Result files are CSV with a
header row. Floats are written with ``repr`` so files round-trip exactly and
identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from sparsesleep.errors import InvalidInputError
from sparsesleep.scenario import NetworkTopology, UserSnapshot

__all__ = [
    "read_topology",
    "read_users",
    "write_active_stations",
    "write_assignment",
    "write_topology",
    "write_trace",
    "write_users",
]


def _f(x) -> str:
    return repr(float(x))


def write_topology(path, topology: NetworkTopology) -> None:
    ex, ey = topology.extent_m
    lines = ["# sparsesleep topology", f"# extent {_f(ex)} {_f(ey)}",
             "# id x_m y_m bandwidth_hz static_power_w"]
    for sid, (x, y), bw, pw in zip(topology.ids, topology.positions_m,
                                    topology.bandwidth_hz, topology.static_power_w):
        lines.append(f"{sid} {_f(x)} {_f(y)} {_f(bw)} {_f(pw)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_users(path, users: UserSnapshot, extent) -> None:
    lines = ["# sparsesleep users", f"# extent {_f(extent[0])} {_f(extent[1])}",
             "# id x_m y_m rate_bps"]
    for uid, (x, y), r in zip(users.ids, users.positions_m, users.rate_bps):
        lines.append(f"{uid} {_f(x)} {_f(y)} {_f(r)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _read_records(path, width):
    extent = None
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "extent":
                extent = np.array([float(parts[1]), float(parts[2])])
            continue
        parts = line.split()
        if len(parts) != width:
            raise InvalidInputError(f"{path}:{lineno}: expected {width} fields, got {len(parts)}")
        rows.append(parts)
    if extent is None:
        raise InvalidInputError(f"{path}: missing '# extent' line")
    return extent, rows


def _parse_id(token):
    return int(token) if token.lstrip("-").isdigit() else token


def read_topology(path) -> NetworkTopology:
    extent, rows = _read_records(path, 5)
    if not rows:
        raise InvalidInputError(f"{path}: no stations")
    data = np.array([[float(v) for v in r[1:]] for r in rows])
    return NetworkTopology(positions_m=data[:, :2], bandwidth_hz=data[:, 2],
                           static_power_w=data[:, 3], extent_m=extent,
                           ids=tuple(_parse_id(r[0]) for r in rows))


def read_users(path):
    """Returns (UserSnapshot, extent)."""
    extent, rows = _read_records(path, 4)
    data = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(-1, 3)
    users = UserSnapshot(positions_m=data[:, :2], rate_bps=data[:, 2],
                         ids=tuple(_parse_id(r[0]) for r in rows))
    return users, extent


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["iteration", "objective", "active_count"])
        for it, f, a in trace.rows():
            out.writerow([it, _f(f), a])


def write_assignment(path, assignment, topology, users) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["user_id", "station_id"])
        for uid, s in zip(users.ids, assignment.assigned_station):
            out.writerow([uid, topology.ids[int(s)]])


def write_active_stations(path, assignment, topology) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["station_id", "static_power_w", "residual_bandwidth_hz"])
        for i in sorted(assignment.active_set):
            out.writerow([topology.ids[i], _f(topology.static_power_w[i]),
                          _f(assignment.residual_bandwidth_hz[i])])
