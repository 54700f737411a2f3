"""Self-checks behind ``sparsesleep validate``.

Each check returns a :class:`CheckResult`. The oracles here (finite
differences, vertex enumeration) share no code with the paths they check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable, List, Optional

import numpy as np

from sparsesleep import lp as lpmod
from sparsesleep import mm
from sparsesleep.errors import InfeasibleError, SizeLimitError
from sparsesleep.scenario import random_instance

__all__ = [
    "CheckResult",
    "check_gradient",
    "check_l0_limit",
    "check_lp_oracle",
    "check_monotone_descent",
    "random_small_lp",
    "run_all",
    "vertex_enumeration_optimum",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def vertex_enumeration_optimum(lp: lpmod.AssignmentLP, tol: float = 1e-9, max_combos: int = 2_000_000):
    """Exact LP optimum by enumerating every vertex of the feasible polytope.

    Every vertex makes n linearly independent constraints tight: all user
    equalities plus n - N of the inequalities (scaled capacity rows and the
    0/1 bounds). Returns (objective, x), or (inf, None) if infeasible.
    """
    a_eq, b_eq, a_ub, b_ub = lp.dense_constraints()
    n = lp.num_vars
    g = np.vstack([a_ub, -np.eye(n), np.eye(n)])
    h = np.concatenate([b_ub, np.zeros(n), np.ones(n)])
    k = n - a_eq.shape[0]
    if k < 0:
        return math.inf, None
    if math.comb(g.shape[0], k) > max_combos:
        raise SizeLimitError("too many vertex candidates")
    combos = np.array(list(itertools.combinations(range(g.shape[0]), k)), dtype=int)
    combos = combos.reshape(len(combos), k)
    mats = np.concatenate([np.broadcast_to(a_eq, (len(combos),) + a_eq.shape), g[combos]], axis=1)
    rhs = np.concatenate([np.broadcast_to(b_eq, (len(combos), len(b_eq))), h[combos]], axis=1)
    det = np.linalg.det(mats)
    ok = np.abs(det) > 1e-12
    if not ok.any():
        return math.inf, None
    xs = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feas = (np.all(np.abs(xs @ a_eq.T - b_eq) <= tol, axis=1)
            & np.all(xs @ g.T <= h + tol, axis=1))
    if not feas.any():
        return math.inf, None
    xs = xs[feas]
    vals = xs @ lp.cost
    best = int(np.argmin(vals))
    return float(vals[best]), xs[best]


def random_small_lp(rng, max_vars: int = 8) -> lpmod.AssignmentLP:
    """Random assignment LP with at most ``max_vars`` variables (may be infeasible)."""
    rng = np.random.default_rng(rng)
    while True:
        m = int(rng.integers(1, 5))
        n = int(rng.integers(1, 5))
        mask = rng.uniform(size=(m, n)) < 0.7
        for j in range(n):
            if not mask[:, j].any():
                mask[rng.integers(m), j] = True
        if mask.sum() <= max_vars:
            break
    demand = np.where(mask, rng.uniform(0.5, 3.0, size=(m, n)), np.inf)
    link = SimpleNamespace(demand=demand)
    capacity = rng.uniform(0.5, 4.0, size=m)
    return lpmod.build_lp(link, capacity, rng.uniform(0.0, 1.0, size=(m, n)))


def check_gradient(rng=0, n_points: int = 100, tol: float = 1e-6, h: float = 1e-6,
                   gradient_fn: Optional[Callable] = None) -> CheckResult:
    """Analytic gradient vs central differences at random interior points."""
    rng = np.random.default_rng(rng)
    grad = gradient_fn or mm.gradient
    worst = 0.0
    for _ in range(n_points):
        m, n = int(rng.integers(2, 11)), int(rng.integers(2, 21))
        eps = 10.0 ** rng.uniform(-3, -1)
        x = rng.dirichlet(np.ones(m), size=n).T
        w = x.ravel(order="F")
        g = grad(w, eps, m, n)
        fd = np.empty_like(w)
        for k in range(w.size):
            e = np.zeros_like(w)
            e[k] = h
            fd[k] = (mm.objective(w + e, eps, m, n) - mm.objective(w - e, eps, m, n)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-300))))
    return CheckResult("gradient", worst < tol, f"max relative error {worst:.2e} (tol {tol:.0e})")


def random_feasible_instance(rng, m_range=(2, 10), n_range=(4, 40), load_range=(0.5, 2.0)):
    """Random radio instance that admits a feasible start (redrawn otherwise)."""
    while True:
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        topo, users, link = random_instance(rng, m, n, load=rng.uniform(*load_range))
        try:
            mm.initialize(link, topo, users)
        except InfeasibleError:
            continue
        return topo, users, link


def check_monotone_descent(rng=0, n_instances: int = 100, slack: float = 1e-8,
                           cfg: mm.MMConfig = mm.MMConfig()) -> CheckResult:
    """f(w^(n+1)) <= f(w^(n)) + slack along full MM runs; every iterate LP-feasible."""
    rng = np.random.default_rng(rng)
    worst = -math.inf
    infeasible = 0
    for _ in range(n_instances):
        topo, users, link = random_feasible_instance(rng)
        _, trace = mm.run(link, topo, users, cfg, keep_iterates=True, ignore_tolerance=True)
        f = np.asarray(trace.objective_per_iter)
        worst = max(worst, float(np.max(np.diff(f))))
        lp = lpmod.build_lp(link, topo.bandwidth_hz)
        m, n = link.shape
        for w in trace.w_per_iter:
            x = lp.from_matrix(w.reshape((m, n), order="F"))
            infeasible += not lp.is_feasible(x)
    ok = worst <= slack and infeasible == 0
    return CheckResult("monotone_descent", ok,
                       f"largest objective increase {worst:.2e} (slack {slack:.0e}), "
                       f"{infeasible} infeasible iterates over {n_instances} runs")


def check_lp_oracle(rng=0, n_instances: int = 200, tol: float = 1e-7) -> CheckResult:
    """Simplex objective vs vertex enumeration on LPs with at most 8 variables."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    mismatched = 0
    for _ in range(n_instances):
        lp = random_small_lp(rng)
        sol = lpmod.solve(lp)
        ref, _ = vertex_enumeration_optimum(lp)
        if not sol.optimal or not math.isfinite(ref):
            mismatched += sol.optimal != math.isfinite(ref)
            continue
        err = max(abs(sol.objective - ref), max(lp.residuals(sol.w)))
        worst = max(worst, err)
    ok = worst <= tol and mismatched == 0
    return CheckResult("lp_oracle", ok,
                       f"max objective/feasibility error {worst:.2e} (tol {tol:.0e}), "
                       f"{mismatched} status mismatches over {n_instances} LPs")


def check_l0_limit(rng=0, n_vectors: int = 20,
                   epsilons=(1e-2, 1e-4, 1e-6, 1e-8, 1e-10)) -> CheckResult:
    """Log-sum relaxation approaches the nonzero count as epsilon shrinks.

    Checks strict improvement along ``epsilons`` and the exact error bound
    sum_i |ln|h_i|| / ln(1 + 1/eps) at the smallest epsilon.
    """
    rng = np.random.default_rng(rng)
    ok = True
    worst_ratio = 0.0
    for _ in range(n_vectors):
        h = _random_sparse_vector(rng)
        k = np.count_nonzero(h)
        errs = [abs(mm.l0_relaxation_value(h, e) - k) for e in epsilons]
        ok &= all(b < a for a, b in zip(errs, errs[1:]))
        nz = np.abs(h[h != 0])
        bound = np.sum(np.abs(np.log(nz))) / math.log1p(1.0 / epsilons[-1])
        ok &= errs[-1] <= bound + 1e-12
        worst_ratio = max(worst_ratio, errs[-1] / max(k, 1))
    return CheckResult("l0_limit", bool(ok),
                       f"strictly improving in epsilon; worst error per nonzero at "
                       f"eps={epsilons[-1]:.0e} is {worst_ratio:.3f}")


def _random_sparse_vector(rng):
    size = int(rng.integers(3, 21))
    h = np.zeros(size)
    k = int(rng.integers(1, size + 1))
    idx = rng.choice(size, size=k, replace=False)
    h[idx] = rng.uniform(0.1, 10.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    return h


def run_all(seed: int = 0, tolerance_scale: float = 1.0, corrupt_gradient: bool = False,
            quick: bool = False) -> List[CheckResult]:
    """Run every check. ``tolerance_scale`` < 1 tightens all thresholds.

    ``corrupt_gradient`` swaps in a deliberately wrong gradient (negative control).
    """
    grad = None
    if corrupt_gradient:
        def grad(w, eps, m, n):
            return mm.gradient(w, eps, m, n) * 1.01
    scale = float(tolerance_scale)
    counts = dict(points=20, instances=15, lps=50, vectors=20) if quick else \
        dict(points=100, instances=100, lps=200, vectors=20)
    return [
        check_gradient(seed, counts["points"], tol=1e-6 * scale, gradient_fn=grad),
        check_monotone_descent(seed, counts["instances"], slack=1e-8 * scale),
        check_lp_oracle(seed, counts["lps"], tol=1e-7 * scale),
        check_l0_limit(seed, counts["vectors"]),
    ]
