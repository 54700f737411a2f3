"""Experiment orchestration: single solves, load sweeps and result files."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from sparsesleep import formats
from sparsesleep.baselines import (
    MAX_BRUTE_FORCE_STATIONS,
    MAX_BRUTE_FORCE_USERS,
    brute_force_optimum,
    greedy_switchoff,
    nearest_station_solution,
)
from sparsesleep.config import RunConfig
from sparsesleep.errors import InfeasibleError, SolverError
from sparsesleep.mm import run as mm_run
from sparsesleep.radio import build_link_matrix, draw_shadowing
from sparsesleep.rounding import energy_of, round_assignment
from sparsesleep.scenario import generate_hex_grid, sample_users

__all__ = [
    "SOLVERS",
    "SolveOutcome",
    "SweepResult",
    "build_instance",
    "cmd_generate",
    "cmd_solve",
    "cmd_sweep",
    "instance_seeds",
    "solve_instance",
]

logger = logging.getLogger(__name__)

SOLVERS = ("mm", "greedy_switchoff", "nearest", "brute_force")


def instance_seeds(seed: int, realization: int):
    """Independent streams for the user drop and the shadowing of one realization.

    Keyed by (seed, realization) only, so every load level of a sweep reuses
    the same streams (common random numbers).
    """
    users_ss, shadow_ss = np.random.SeedSequence([int(seed), int(realization)]).spawn(2)
    return users_ss, shadow_ss


def build_instance(cfg: RunConfig, mean_users: float, realization: int = 0,
                   topology=None, users=None):
    """(topology, users, link) for one realization. Given objects are used as is."""
    sc = cfg.scenario
    users_seed, shadow_seed = instance_seeds(sc.seed, realization)
    if topology is None:
        topology = generate_hex_grid(sc.rows, sc.cols, sc.spacing_m,
                                     bandwidth_hz=sc.bandwidth_hz, static_power_w=sc.static_power_w)
    if users is None:
        users = sample_users(users_seed, mean_users, sc.rate_bps, sc.hotspots, topology.extent_m)
    if users.num_users == 0:
        return topology, users, None
    shadow = draw_shadowing(shadow_seed, topology.num_stations, users.num_users,
                            cfg.radio.shadow_sigma_db)
    return topology, users, build_link_matrix(topology, users, cfg.radio, shadow)


@dataclass
class SolveOutcome:
    relaxed: object
    trace: object
    assignment: object
    energy: object
    seconds: float


def solve_mm(topology, users, link, cfg: RunConfig, keep_iterates=False) -> SolveOutcome:
    """Full pipeline: MM iterations, rounding, energy."""
    t0 = time.perf_counter()
    relaxed, trace = mm_run(link, topology, users, cfg.solver.mm(), keep_iterates=keep_iterates)
    assignment = round_assignment(relaxed, link, topology,
                                  leftover_policy=cfg.solver.leftover_policy)
    problems = assignment.violations(link, topology.bandwidth_hz)
    if problems:
        raise SolverError("rounded assignment violates constraints: " + "; ".join(problems))
    return SolveOutcome(relaxed, trace, assignment, energy_of(assignment, topology),
                        time.perf_counter() - t0)


def solve_instance(topology, users, link, cfg: RunConfig, bruteforce: bool = False) -> Dict:
    """Run every solver on the same instance; returns one flat result row.

    A solver that fails records NaN for its count and its status string.
    """
    row: Dict = {"num_users": users.num_users}
    times: Dict = {}
    if link is None:
        for name in SOLVERS:
            row[f"{name}_active"] = 0 if (name != "brute_force" or bruteforce) else math.nan
            row[f"{name}_energy_w"] = 0.0 if (name != "brute_force" or bruteforce) else math.nan
        row.update(mm_iterations=0, mm_termination="empty", status="ok")
        return {"row": row, "times": {}}

    status = "ok"
    try:
        out = solve_mm(topology, users, link, cfg)
        row["mm_active"] = out.energy.active_count
        row["mm_energy_w"] = out.energy.total_power_w
        row["mm_iterations"] = out.trace.iterations_used
        row["mm_termination"] = out.trace.termination_reason
        times["mm"] = out.seconds
    except InfeasibleError:
        status = "infeasible"
        row.update(mm_active=math.nan, mm_energy_w=math.nan, mm_iterations=0,
                   mm_termination="infeasible")

    for name, fn in (("greedy_switchoff", greedy_switchoff), ("nearest", nearest_station_solution)):
        t0 = time.perf_counter()
        try:
            a = fn(link, topology, users)
            e = energy_of(a, topology)
            row[f"{name}_active"], row[f"{name}_energy_w"] = e.active_count, e.total_power_w
        except InfeasibleError:
            row[f"{name}_active"], row[f"{name}_energy_w"] = math.nan, math.nan
        times[name] = time.perf_counter() - t0

    small = link.num_stations <= MAX_BRUTE_FORCE_STATIONS and link.num_users <= MAX_BRUTE_FORCE_USERS
    row["brute_force_active"] = row["brute_force_energy_w"] = math.nan
    if bruteforce and small:
        t0 = time.perf_counter()
        try:
            k, a = brute_force_optimum(link, topology.bandwidth_hz)
            row["brute_force_active"] = k
            row["brute_force_energy_w"] = energy_of(a, topology).total_power_w
        except InfeasibleError:
            status = "infeasible"
        times["brute_force"] = time.perf_counter() - t0
    elif bruteforce:
        logger.warning("brute force skipped: %dx%d exceeds %dx%d", link.num_stations,
                       link.num_users, MAX_BRUTE_FORCE_STATIONS, MAX_BRUTE_FORCE_USERS)
    row["status"] = status
    return {"row": row, "times": times}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for r in rows:
            out.writerow([_fmt(r.get(h, "")) for h in header])


def cmd_solve(cfg: RunConfig, out_dir=None, topology=None, users=None) -> SolveOutcome:
    """Solve one realization and write trace.csv, assignment.csv, active_stations.csv."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    topology, users, link = build_instance(cfg, cfg.scenario.mean_users, 0, topology, users)
    if link is None:
        raise InfeasibleError("the snapshot contains no users")
    result = solve_mm(topology, users, link, cfg)
    formats.write_trace(out / "trace.csv", result.trace)
    formats.write_assignment(out / "assignment.csv", result.assignment, topology, users)
    formats.write_active_stations(out / "active_stations.csv", result.assignment, topology)
    logger.info("solve: %d users, %d active stations, %.1f W, %d MM iterations (%s), %.2fs",
                users.num_users, result.energy.active_count, result.energy.total_power_w,
                result.trace.iterations_used, result.trace.termination_reason, result.seconds)
    return result


def cmd_generate(cfg: RunConfig, out_dir=None, realization: int = 0):
    """Write topology.txt and users.txt for one realization."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    topology, users, _ = build_instance(cfg, cfg.scenario.mean_users, realization)
    formats.write_topology(out / "topology.txt", topology)
    formats.write_users(out / "users.txt", users, topology.extent_m)
    return topology, users


@dataclass
class SweepResult:
    runs: List[Dict] = field(default_factory=list)
    summary: List[Dict] = field(default_factory=list)
    timings: List[Dict] = field(default_factory=list)

    def mean_active(self, solver: str) -> List[float]:
        return [s[f"{solver}_active_mean"] for s in self.summary]


def _sweep_task(args):
    cfg, level, realization = args
    topology, users, link = build_instance(cfg, level, realization)
    return solve_instance(topology, users, link, cfg, bruteforce=cfg.enable_bruteforce)


def _mean_sem(values):
    v = np.asarray([x for x in values if not (isinstance(x, float) and math.isnan(x))], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    sem = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(np.mean(v)), sem


def cmd_sweep(cfg: RunConfig, out_dir=None, write: bool = True) -> SweepResult:
    """All solvers on every (load level, realization); means and standard errors per level."""
    levels = cfg.scenario.load_levels
    tasks = [(cfg, level, r) for level in levels for r in range(cfg.realizations)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outputs = list(pool.map(_sweep_task, tasks))
    else:
        outputs = [_sweep_task(t) for t in tasks]

    result = SweepResult()
    for (_, level, r), o in zip(tasks, outputs):
        result.runs.append({"mean_users": level, "realization": r, **o["row"]})
        result.timings.append({"mean_users": level, "realization": r,
                               **{f"{k}_seconds": v for k, v in o["times"].items()}})
    for level in levels:
        rows = [x for x in result.runs if x["mean_users"] == level]
        s: Dict = {"mean_users": level, "realizations": len(rows)}
        for name in SOLVERS:
            s[f"{name}_active_mean"], s[f"{name}_active_sem"] = _mean_sem(
                [x[f"{name}_active"] for x in rows])
        s["mm_gap_mean"], s["mm_gap_sem"] = _mean_sem(
            [x["mm_active"] - x["brute_force_active"] for x in rows])
        result.summary.append(s)

    if write:
        out = Path(out_dir or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        run_cols = ["mean_users", "realization", "num_users", "status"]
        for name in SOLVERS:
            run_cols += [f"{name}_active", f"{name}_energy_w"]
        run_cols += ["mm_iterations", "mm_termination"]
        _write_csv(out / "sweep_runs.csv", run_cols, result.runs)
        sum_cols = ["mean_users", "realizations"]
        for name in SOLVERS:
            sum_cols += [f"{name}_active_mean", f"{name}_active_sem"]
        sum_cols += ["mm_gap_mean", "mm_gap_sem"]
        _write_csv(out / "sweep_summary.csv", sum_cols, result.summary)
        time_cols = ["mean_users", "realization"] + [f"{n}_seconds" for n in SOLVERS]
        _write_csv(out / "sweep_timings.csv", time_cols, result.timings)
    return result
