import numpy as np
import pytest

from sparsesleep.radio import LinkMatrix
from sparsesleep.scenario import NetworkTopology


def make_instance(demand, capacity, distance=None, power=400.0, spec_eff=None):
    """Hand-built (topology, link) pair with the given bandwidth demands.

    Rates are 1 bit/s so spectral efficiency is 1/demand; ``inf`` demand marks
    a link with zero efficiency. ``spec_eff`` overrides the efficiencies used by
    efficiency-ordered rules while keeping demands exact.
    """
    demand = np.asarray(demand, dtype=float)
    m, n = demand.shape
    eff = np.where(np.isfinite(demand), 1.0 / demand, 0.0)
    if distance is None:
        distance = np.tile(np.arange(m, dtype=float)[:, None] * 100.0 + 100.0, (1, n))
    link = LinkMatrix.from_spec_eff(eff, 1.0, distance_m=distance)
    # exact demands, free of the 1/(1/x) round trip
    object.__setattr__(link, "demand", demand.copy())
    if spec_eff is not None:
        object.__setattr__(link, "spec_eff", np.asarray(spec_eff, dtype=float))
    topo = NetworkTopology(
        positions_m=np.column_stack([np.arange(m) * 10.0, np.zeros(m)]),
        bandwidth_hz=capacity,
        static_power_w=power,
        extent_m=np.array([10.0 * m + 10.0, 10.0]),
    )
    return topo, link


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
