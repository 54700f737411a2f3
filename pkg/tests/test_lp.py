import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsesleep import lp as lpmod
from sparsesleep.errors import InfeasibleError, InvalidInputError, SolverError
from sparsesleep.radio import LinkMatrix
from sparsesleep.scenario import random_instance
from sparsesleep.validation import random_small_lp, vertex_enumeration_optimum


def demand_link(demand):
    demand = np.asarray(demand, dtype=float)
    return LinkMatrix.from_spec_eff(np.where(np.isfinite(demand), 1.0 / demand, 0.0), 1.0)


def test_counts_rows_and_variables():
    lp = lpmod.build_lp(demand_link(np.ones((2, 3))), 10.0)
    a_eq, b_eq, a_ub, b_ub = lp.dense_constraints()
    assert lp.num_vars == 6
    assert a_eq.shape == (3, 6) and a_ub.shape == (2, 6)
    assert lp.variable_index[(1, 2)] == 5  # column-major: i + M*j


def test_zero_efficiency_link_is_not_a_variable():
    lp = lpmod.build_lp(demand_link([[1.0, np.inf], [1.0, 1.0]]), 10.0)
    assert lp.num_vars == 3
    assert (0, 1) not in lp.variable_index


def test_user_without_links_is_infeasible_at_build():
    with pytest.raises(InfeasibleError):
        lpmod.build_lp(demand_link([[1.0, np.inf], [1.0, np.inf]]), 10.0)


def test_bad_inputs():
    with pytest.raises(InvalidInputError):
        lpmod.build_lp(demand_link([[1.0]]), 0.0)
    with pytest.raises(InvalidInputError):
        lpmod.build_lp(demand_link([[1.0]]), 1.0, costs=[1.0, 2.0, 3.0])


def test_equal_costs_objective_is_user_count():
    lp = lpmod.build_lp(demand_link(np.full((3, 5), 1.0)), 2.5, costs=0.7)
    sol = lpmod.solve(lp)
    assert sol.optimal
    assert sol.objective == pytest.approx(5 * 0.7)
    assert lp.is_feasible(sol.w)


def test_cheapest_station_takes_the_user():
    lp = lpmod.build_lp(demand_link([[1.0], [1.0]]), 10.0, costs=[1.0, 2.0])
    sol = lpmod.solve(lp)
    assert sol.w == pytest.approx([1.0, 0.0])
    assert sol.objective == pytest.approx(1.0)


def test_half_capacity_splits_the_user():
    lp = lpmod.build_lp(demand_link([[2.0], [2.0]]), [1.0, 10.0], costs=[1.0, 2.0])
    sol = lpmod.solve(lp)
    assert sol.w == pytest.approx([0.5, 0.5], abs=1e-12)
    assert sol.objective == pytest.approx(1.5)


def test_overloaded_instance_is_infeasible():
    # total demand 6 exceeds total capacity 4 for every split
    lp = lpmod.build_lp(demand_link([[3.0, 3.0], [3.0, 3.0]]), [2.0, 2.0])
    assert lpmod.solve(lp).status == "infeasible"
    assert lpmod.find_feasible_point(lp).status == "infeasible"


def test_feasible_point_with_ample_capacity():
    lp = lpmod.build_lp(demand_link(np.ones((3, 4))), 100.0)
    sol = lpmod.find_feasible_point(lp)
    assert sol.optimal and lp.is_feasible(sol.w)


def test_feasible_point_on_knife_edge_capacity():
    lp = lpmod.build_lp(demand_link([[1.5, 2.5]]), 4.0)
    sol = lpmod.find_feasible_point(lp)
    assert sol.optimal
    assert sol.w == pytest.approx([1.0, 1.0])


def test_feasible_point_on_scenario_instances(rng):
    for _ in range(20):
        _, _, link = random_instance(rng, 5, 20, load=0.8)
        lp = lpmod.build_lp(link, 5e6)
        assert lpmod.find_feasible_point(lp).optimal


def test_solution_is_deterministic(rng):
    _, _, link = random_instance(rng, 6, 25)
    lp = lpmod.build_lp(link, 5e6, rng.uniform(0.1, 1.0, size=6))
    a, b = lpmod.solve(lp), lpmod.solve(lp)
    assert a.w.tobytes() == b.w.tobytes()


def test_matches_vertex_enumeration_on_small_lps():
    rng = np.random.default_rng(7)
    statuses = set()
    for _ in range(80):
        lp = random_small_lp(rng)
        sol = lpmod.solve(lp)
        ref, _ = vertex_enumeration_optimum(lp)
        statuses.add(sol.status)
        assert sol.optimal == np.isfinite(ref)
        if sol.optimal:
            assert sol.objective == pytest.approx(ref, abs=1e-7)
            assert lp.is_feasible(sol.w, 1e-7)
    assert statuses == {"optimal", "infeasible"}


def test_vertex_enumeration_oracle_hand_case():
    # two users, two stations; cheap station fits only one user
    lp = lpmod.build_lp(demand_link([[1.0, 1.0], [1.0, 1.0]]), [1.0, 5.0], costs=[[0.0, 0.0], [1.0, 1.0]])
    obj, x = vertex_enumeration_optimum(lp)
    assert obj == pytest.approx(1.0)
    assert lpmod.solve(lp).objective == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(8))
def test_matches_highs_on_radio_instances(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(3, 12)), int(rng.integers(10, 60))
    _, _, link = random_instance(rng, m, n, load=rng.uniform(0.5, 2.5))
    try:
        lp = lpmod.build_lp(link, 5e6, rng.uniform(0.01, 1.0, size=m))
    except InfeasibleError:
        pytest.skip("instance has a user with no admitted link")
    ours = lpmod.solve(lp)
    ref = lpmod.solve(lp, backend="highs")
    assert ours.status == ref.status
    if ours.optimal:
        assert ours.objective == pytest.approx(ref.objective, rel=1e-7, abs=1e-9)
        assert lp.is_feasible(ours.w, 1e-7)


def test_not_beaten_by_random_feasible_points():
    rng = np.random.default_rng(3)
    for _ in range(5):
        m, n = 3, 5
        demand = rng.uniform(0.5, 1.5, size=(m, n))
        lp = lpmod.build_lp(demand_link(demand), rng.uniform(2.0, 4.0, size=m),
                            rng.uniform(0.0, 1.0, size=(m, n)))
        sol = lpmod.solve(lp)
        assert sol.optimal
        pts = rng.dirichlet(np.ones(m), size=(10_000, n)).transpose(0, 2, 1)  # (S, M, N)
        feasible = np.all(np.einsum("smn,mn->sm", pts, demand) <= lp.capacity_hz, axis=1)
        objs = np.einsum("smn,mn->s", pts[feasible], lp.to_matrix(lp.cost))
        assert objs.size > 100
        assert sol.objective <= objs.min() + 1e-12


def test_warm_start_reaches_same_optimum(rng):
    _, _, link = random_instance(rng, 8, 40)
    lp = lpmod.build_lp(link, 5e6)
    first = lpmod.solve(lp.with_costs(rng.uniform(0.1, 1.0, size=8)))
    new = lp.with_costs(rng.uniform(0.1, 1.0, size=8))
    warm, cold = lpmod.solve(new, warm_start=first.basis), lpmod.solve(new)
    assert warm.objective == pytest.approx(cold.objective, rel=1e-9)


def test_iteration_cap_is_a_solver_error(rng):
    _, _, link = random_instance(rng, 8, 40)
    lp = lpmod.build_lp(link, 5e6, rng.uniform(0.1, 1.0, size=8))
    with pytest.raises(SolverError):
        lpmod.solve(lp, max_iter=2)


def test_highly_degenerate_instance_terminates():
    # identical users, identical stations, capacity binding: many ties
    lp = lpmod.build_lp(demand_link(np.ones((6, 12))), 2.0, costs=[1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
    sol = lpmod.solve(lp)
    assert sol.optimal
    assert sol.objective == pytest.approx(3 * 2 * 1.0 + 6 * 2.0)


def test_lp_file_dump(tmp_path):
    lp = lpmod.build_lp(demand_link([[1.0, 2.0], [3.0, np.inf]]), [4.0, 5.0], costs=[1.0, 2.0])
    path = tmp_path / "model.lp"
    lpmod.write_lp_file(lp, path)
    text = path.read_text()
    for section in ("Minimize", "Subject To", "Bounds", "End"):
        assert section in text


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimal_points_are_feasible(seed):
    lp = random_small_lp(np.random.default_rng(seed))
    sol = lpmod.solve(lp)
    if sol.optimal:
        assert lp.is_feasible(sol.w, 1e-7)
        assert sol.objective == pytest.approx(float(lp.cost @ sol.w), abs=1e-12)
