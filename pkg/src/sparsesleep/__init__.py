"""Energy-aware base station selection via reweighted linear programming.

The solver picks a small set of active base stations that still meets every
user's rate requirement. A concave log-sum surrogate of the active-station
count is minimized by majorization-minimization, each step being a linear
program, and the fractional result is rounded to a binary user assignment.
"""

from sparsesleep.errors import (
    ConfigError,
    InfeasibleError,
    InvalidInputError,
    SizeLimitError,
    SolverError,
)
from sparsesleep.radio import LinkMatrix, RadioConfig, build_link_matrix
from sparsesleep.scenario import (
    HotspotSpec,
    NetworkTopology,
    UserSnapshot,
    generate_hex_grid,
    sample_users,
    wrap_distance,
)
from sparsesleep.lp import AssignmentLP, LPSolution, build_lp, find_feasible_point, solve
from sparsesleep.mm import MMConfig, RelaxedAssignment, SolveTrace, run
from sparsesleep.rounding import BinaryAssignment, EnergyReport, energy_of, round_assignment
from sparsesleep.baselines import brute_force_optimum, greedy_switchoff, nearest_station_solution


__version__ = "0.1.0"

__all__ = [
    "AssignmentLP",
    "BinaryAssignment",
    "ConfigError",
    "EnergyReport",
    "HotspotSpec",
    "InfeasibleError",
    "InvalidInputError",
    "LPSolution",
    "LinkMatrix",
    "MMConfig",
    "NetworkTopology",
    "RadioConfig",
    "RelaxedAssignment",
    "SizeLimitError",
    "SolveTrace",
    "SolverError",
    "UserSnapshot",
    "brute_force_optimum",
    "build_link_matrix",
    "build_lp",
    "energy_of",
    "find_feasible_point",
    "generate_hex_grid",
    "greedy_switchoff",
    "nearest_station_solution",
    "round_assignment",
    "run",
    "sample_users",
    "solve",
    "wrap_distance",
]
