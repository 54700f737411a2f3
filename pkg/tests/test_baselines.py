import itertools

import numpy as np
import pytest

from sparsesleep import mm
from sparsesleep.baselines import brute_force_optimum, greedy_switchoff, nearest_station_solution
from sparsesleep.errors import InfeasibleError, SizeLimitError
from sparsesleep.rounding import round_assignment
from sparsesleep.scenario import random_instance

from conftest import make_instance


def enumerate_optimum(demand, capacity):
    """Minimum active count over every one-hot X (each user on one station)."""
    m, n = demand.shape
    best = None
    for stations in itertools.product(range(m), repeat=n):
        s = np.array(stations)
        load = np.bincount(s, weights=demand[s, np.arange(n)], minlength=m)
        if np.all(load <= capacity * (1 + 1e-9)):
            k = len(set(stations))
            best = k if best is None else min(best, k)
    return best


def test_both_users_fit_on_one_station():
    topo, link = make_instance(np.full((2, 2), 0.5), 1.0)
    k, a = brute_force_optimum(link, topo.bandwidth_hz)
    assert k == 1 and a.active_count == 1


def test_each_station_fits_one_user():
    topo, link = make_instance(np.full((2, 2), 0.6), 1.0)
    assert brute_force_optimum(link, topo.bandwidth_hz)[0] == 2


def test_random_4x6_matches_full_enumeration():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(15):
        demand = rng.uniform(0.1, 0.9, size=(4, 6))
        demand[rng.uniform(size=(4, 6)) < 0.15] = np.inf
        cap = rng.uniform(0.8, 1.6, size=4)
        topo, link = make_instance(demand, cap)
        ref = enumerate_optimum(demand, cap)
        if ref is None:
            with pytest.raises(InfeasibleError):
                brute_force_optimum(link, cap)
            continue
        k, witness = brute_force_optimum(link, cap)
        assert k == ref
        assert witness.violations(link, cap) == []
        checked += 1
    assert checked >= 10


def test_size_limit():
    topo, link = make_instance(np.full((7, 3), 0.1), 1.0)
    with pytest.raises(SizeLimitError):
        brute_force_optimum(link, 1.0)
    topo, link = make_instance(np.full((2, 11), 0.01), 1.0)
    with pytest.raises(SizeLimitError):
        brute_force_optimum(link, 1.0)


def test_infeasible_even_with_all_stations():
    topo, link = make_instance(np.full((2, 3), 0.6), 1.0)
    with pytest.raises(InfeasibleError):
        brute_force_optimum(link, 1.0)


def test_nearest_station_mirrors_initialization():
    distance = np.array([[100.0, 100.0, 100.0], [500.0, 400.0, 600.0]])
    topo, link = make_instance(np.ones((2, 3)), [2.0, 10.0], distance=distance)
    a = nearest_station_solution(link, topo)
    assert a.assigned_station.tolist() == [0, 0, 1]
    assert np.array_equal(a.to_matrix(2), mm.initialize(link, topo).matrix)


def test_unused_station_is_never_active():
    distance = np.array([[1.0, 1.0], [5.0, 5.0], [9.0, 9.0]])
    topo, link = make_instance(np.full((3, 2), 0.2), 1.0, distance=distance)
    out = greedy_switchoff(link, topo)
    assert out.active_set == {0}


def test_two_stations_merge_into_one():
    distance = np.array([[1.0, 5.0], [5.0, 1.0]])
    topo, link = make_instance(np.full((2, 2), 0.4), 1.0, distance=distance)
    history = []
    out = greedy_switchoff(link, topo, history=history)
    assert out.active_count == 1
    assert history == [0]  # equal loads: lower index offered first


def test_hand_traced_3x6_instance():
    demand = np.array([
        # u0   u1    u2    u3    u4    u5
        [0.3, 0.2, 0.2, 0.3, 0.3, 0.2],
        [0.3, 0.25, 0.3, 0.2, 0.3, 0.2],
        [0.4, 0.2, 0.25, 0.25, 0.2, 0.1],
    ])
    distance = np.array([
        [1, 1, 1, 5, 5, 5],
        [5, 5, 5, 1, 1, 5],
        [5, 5, 5, 5, 5, 1],
    ], dtype=float)
    topo, link = make_instance(demand, 1.0, distance=distance)
    # nearest start: loads 0.7 / 0.5 / 0.1
    start = nearest_station_solution(link, topo)
    assert start.assigned_station.tolist() == [0, 0, 0, 1, 1, 2]
    history = []
    out = greedy_switchoff(link, topo, history=history)
    # station 2 (load 0.1) empties: u5 ties at 0.2 on stations 0 and 1, lower index wins.
    # Then station 1 cannot move u3 (0.3 > 0.1 left on 0), and station 0 cannot
    # move u1 after u0 takes 0.3 of station 1's 0.5. Stop.
    assert history == [2]
    assert out.assigned_station.tolist() == [0, 0, 0, 1, 1, 0]
    assert out.residual_bandwidth_hz == pytest.approx([0.1, 0.5, 1.0])


def test_never_worse_than_start_and_never_beats_optimum():
    rng = np.random.default_rng(17)
    seen = 0
    while seen < 100:
        m, n = int(rng.integers(2, 7)), int(rng.integers(2, 11))
        topo, users, link = random_instance(rng, m, n, load=rng.uniform(0.3, 1.5))
        try:
            k, _ = brute_force_optimum(link, topo.bandwidth_hz)
            start = nearest_station_solution(link, topo, users)
        except InfeasibleError:
            continue
        seen += 1
        greedy = greedy_switchoff(link, topo, users, start=start)
        relaxed, _ = mm.run(link, topo, users)
        rounded = round_assignment(relaxed, link, topo)
        assert greedy.violations(link, topo.bandwidth_hz) == []
        assert greedy.active_count <= start.active_count
        assert k <= min(greedy.active_count, start.active_count, rounded.active_count)
