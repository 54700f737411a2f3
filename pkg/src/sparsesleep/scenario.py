"""Evaluation world: hexagonal station grid on a torus and random user drops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from sparsesleep.errors import InvalidInputError

__all__ = [
    "HotspotSpec",
    "NetworkTopology",
    "UserSnapshot",
    "generate_hex_grid",
    "sample_users",
    "wrap_distance",
    "wrap_distance_matrix",
]


@dataclass(frozen=True)
class NetworkTopology:
    """Base stations on a torus of size ``extent_m``.

    ``positions_m`` is (M, 2); ``bandwidth_hz`` and ``static_power_w`` are (M,).
    """

    positions_m: np.ndarray
    bandwidth_hz: np.ndarray
    static_power_w: np.ndarray
    extent_m: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        pos = np.asarray(self.positions_m, dtype=float).reshape(-1, 2)
        m = pos.shape[0]
        bw = np.broadcast_to(np.asarray(self.bandwidth_hz, dtype=float), (m,)).copy()
        pw = np.broadcast_to(np.asarray(self.static_power_w, dtype=float), (m,)).copy()
        extent = np.asarray(self.extent_m, dtype=float).reshape(2)
        if m == 0:
            raise InvalidInputError("topology needs at least one station")
        if not np.all(extent > 0):
            raise InvalidInputError("extent must be positive")
        if not (np.all(np.isfinite(pos)) and np.all(pos >= 0) and np.all(pos < extent)):
            raise InvalidInputError("station positions must lie inside [0, extent)")
        if not (np.all(bw > 0) and np.all(np.isfinite(bw))):
            raise InvalidInputError("bandwidth_hz must be positive and finite")
        if not (np.all(pw > 0) and np.all(np.isfinite(pw))):
            raise InvalidInputError("static_power_w must be positive and finite")
        ids = tuple(self.ids) if len(self.ids) else tuple(range(m))
        if len(ids) != m:
            raise InvalidInputError("ids length does not match station count")
        for arr in (pos, bw, pw, extent):
            arr.setflags(write=False)
        object.__setattr__(self, "positions_m", pos)
        object.__setattr__(self, "bandwidth_hz", bw)
        object.__setattr__(self, "static_power_w", pw)
        object.__setattr__(self, "extent_m", extent)
        object.__setattr__(self, "ids", ids)

    @property
    def num_stations(self) -> int:
        return self.positions_m.shape[0]


@dataclass(frozen=True)
class UserSnapshot:
    """Users at fixed positions, each with a minimum rate in bit/s."""

    positions_m: np.ndarray
    rate_bps: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        pos = np.asarray(self.positions_m, dtype=float).reshape(-1, 2)
        n = pos.shape[0]
        rate = np.broadcast_to(np.asarray(self.rate_bps, dtype=float), (n,)).copy()
        if not (np.all(rate > 0) and np.all(np.isfinite(rate))):
            raise InvalidInputError("rate_bps must be positive and finite")
        if not np.all(np.isfinite(pos)):
            raise InvalidInputError("user positions must be finite")
        ids = tuple(self.ids) if len(self.ids) else tuple(range(n))
        if len(ids) != n:
            raise InvalidInputError("ids length does not match user count")
        pos.setflags(write=False)
        rate.setflags(write=False)
        object.__setattr__(self, "positions_m", pos)
        object.__setattr__(self, "rate_bps", rate)
        object.__setattr__(self, "ids", ids)

    @property
    def num_users(self) -> int:
        return self.positions_m.shape[0]


@dataclass(frozen=True)
class HotspotSpec:
    """Circular high-density regions.

    ``centers_m`` pins the hotspot centres; when ``None`` they are drawn
    uniformly over the area for each realization.
    """

    count: int = 3
    radius_m: float = 500.0
    drop_probability: float = 0.05
    position_sigma_m: Optional[float] = None
    centers_m: Optional[Sequence[Sequence[float]]] = field(default=None)

    def __post_init__(self):
        if self.count < 0:
            raise InvalidInputError("hotspot count must be >= 0")
        if self.radius_m <= 0:
            raise InvalidInputError("hotspot radius must be positive")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise InvalidInputError("drop_probability must lie in [0, 1]")
        if self.count * self.drop_probability > 1.0 + 1e-12:
            raise InvalidInputError("count * drop_probability exceeds 1")
        if self.position_sigma_m is None:
            object.__setattr__(self, "position_sigma_m", self.radius_m / 2.0)
        if self.position_sigma_m <= 0:
            raise InvalidInputError("position_sigma_m must be positive")
        if self.centers_m is not None and len(self.centers_m) != self.count:
            raise InvalidInputError("centers_m must list one centre per hotspot")


def generate_hex_grid(rows: int, cols: int, spacing_m: float,
                      bandwidth_hz: float = 5e6, static_power_w: float = 400.0) -> NetworkTopology:
    """Stations on a hexagonal lattice; odd rows are shifted by half a spacing.

    The extent equals the lattice periods, so the torus tiles seamlessly when
    ``rows`` is even. With an odd row count the wrap still works as a metric but
    the seam rows are not hexagonally offset.
    """
    if rows < 1 or cols < 1:
        raise InvalidInputError("rows and cols must be >= 1")
    if not spacing_m > 0:
        raise InvalidInputError("spacing_m must be positive")
    row_pitch = spacing_m * math.sqrt(3.0) / 2.0
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    x = c * spacing_m + (r % 2) * spacing_m / 2.0
    y = r * row_pitch
    positions = np.column_stack([x.ravel(), y.ravel()]).astype(float)
    return NetworkTopology(
        positions_m=positions,
        bandwidth_hz=bandwidth_hz,
        static_power_w=static_power_w,
        extent_m=np.array([cols * spacing_m, rows * row_pitch]),
    )


def wrap_distance(a, b, extent) -> float:
    """Euclidean distance on the torus with periods ``extent``."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    extent = np.asarray(extent, dtype=float)
    d = np.minimum(d, extent - d)
    return float(math.hypot(d[0], d[1]))


def wrap_distance_matrix(points_a: np.ndarray, points_b: np.ndarray, extent) -> np.ndarray:
    """Pairwise torus distances, shape (len(points_a), len(points_b))."""
    extent = np.asarray(extent, dtype=float)
    d = np.abs(np.asarray(points_a, float)[:, None, :] - np.asarray(points_b, float)[None, :, :])
    d = np.minimum(d, extent - d)
    return np.hypot(d[..., 0], d[..., 1])


def sample_users(rng_seed, mean_user_count: float, rate_bps: float,
                 hotspots: HotspotSpec, extent) -> UserSnapshot:
    """Draw one user snapshot.

    The user count is Poisson distributed. Each user lands in a hotspot with
    probability ``count * drop_probability`` (hotspot chosen uniformly), where
    its position is Gaussian around the centre and folded onto the torus;
    otherwise it is uniform over the whole area.
    """
    if not mean_user_count > 0:
        raise InvalidInputError("mean_user_count must be positive")
    extent = np.asarray(extent, dtype=float).reshape(2)
    rng = np.random.default_rng(rng_seed)

    # draw order is part of the reproducibility contract
    if hotspots.count and hotspots.centers_m is None:
        centers = rng.uniform(0.0, 1.0, size=(hotspots.count, 2)) * extent
    elif hotspots.count:
        centers = np.mod(np.asarray(hotspots.centers_m, dtype=float), extent)
    else:
        centers = np.zeros((0, 2))

    n = int(rng.poisson(mean_user_count))
    uniform_pos = rng.uniform(0.0, 1.0, size=(n, 2)) * extent
    in_hotspot = rng.uniform(size=n) < hotspots.count * hotspots.drop_probability
    which = rng.integers(0, max(hotspots.count, 1), size=n)
    offsets = rng.normal(0.0, hotspots.position_sigma_m, size=(n, 2))

    positions = uniform_pos
    if hotspots.count:
        hot_pos = np.mod(centers[which] + offsets, extent)
        positions = np.where(in_hotspot[:, None], hot_pos, uniform_pos)
    # np.mod can round up to exactly the period
    positions = np.where(positions >= extent, 0.0, positions)
    return UserSnapshot(positions_m=positions, rate_bps=np.full(n, float(rate_bps)))


def random_instance(rng, num_stations: int, num_users: int, load: float = 1.5,
                    side_m: float = 1000.0, radio_cfg=None, static_power_w=400.0):
    """Small random instance for tests and self-checks.

    Stations and users are uniform on a square torus; user rates are scaled so
    the total bandwidth demand at the mean spectral efficiency is roughly
    ``load`` station capacities. Returns (topology, users, link).
    """
    from sparsesleep.radio import RadioConfig, build_link_matrix, draw_shadowing

    rng = np.random.default_rng(rng)
    cfg = radio_cfg or RadioConfig()
    extent = np.array([side_m, side_m])
    topo = NetworkTopology(
        positions_m=rng.uniform(0, side_m, size=(num_stations, 2)),
        bandwidth_hz=5e6,
        static_power_w=static_power_w,
        extent_m=extent,
    )
    user_pos = rng.uniform(0, side_m, size=(num_users, 2))
    shadow = draw_shadowing(rng, num_stations, num_users, cfg.shadow_sigma_db)
    probe = build_link_matrix(topo, UserSnapshot(user_pos, 1.0), cfg, shadow)
    mean_eff = float(np.mean(probe.spec_eff.max(axis=0)))
    rate = load * 5e6 * mean_eff / num_users
    users = UserSnapshot(user_pos, rate)
    return topo, users, build_link_matrix(topo, users, cfg, shadow)
