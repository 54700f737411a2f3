"""Link budget: log-distance path loss, shadowing and worst-case-interference SINR."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sparsesleep.errors import InvalidInputError
from sparsesleep.scenario import NetworkTopology, UserSnapshot, wrap_distance_matrix

__all__ = [
    "LinkMatrix",
    "RadioConfig",
    "build_link_matrix",
    "dbm_to_watts",
    "draw_shadowing",
    "path_loss_db",
    "received_power_w",
    "spectral_efficiency",
]


@dataclass(frozen=True)
class RadioConfig:
    """Propagation and link-abstraction parameters.

    Defaults follow the usual urban-macro values: 128.1 + 37.6 log10(d / km),
    8 dB log-normal shadowing, 46 dBm transmit power and thermal noise over
    ``noise_bandwidth_hz``.
    """

    tx_power_dbm: float = 46.0
    pathloss_intercept_db: float = 128.1
    pathloss_exponent_coeff: float = 37.6
    shadow_sigma_db: float = 8.0
    noise_psd_dbm_per_hz: float = -174.0
    noise_bandwidth_hz: float = 5e6
    bandwidth_eff: float = 1.0
    sinr_eff: float = 1.0
    min_distance_m: float = 35.0

    def __post_init__(self):
        if not self.bandwidth_eff > 0:
            raise InvalidInputError("bandwidth_eff must be > 0")
        if not self.sinr_eff > 0:
            raise InvalidInputError("sinr_eff must be > 0")
        if not self.shadow_sigma_db >= 0:
            raise InvalidInputError("shadow_sigma_db must be >= 0")
        if not self.min_distance_m > 0:
            raise InvalidInputError("min_distance_m must be > 0")
        if not self.noise_bandwidth_hz > 0:
            raise InvalidInputError("noise_bandwidth_hz must be > 0")

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watts(self.noise_psd_dbm_per_hz + 10.0 * math.log10(self.noise_bandwidth_hz))


@dataclass(frozen=True)
class LinkMatrix:
    """Per-link constants for an (M stations) x (N users) instance.

    ``demand`` holds the bandwidth r_j / omega_ij in Hz and is ``inf`` on links
    with zero spectral efficiency. ``distance_m`` is the torus distance and
    drives the nearest-station rules.
    """

    rx_power_w: np.ndarray
    spec_eff: np.ndarray
    demand: np.ndarray
    distance_m: np.ndarray
    rate_bps: np.ndarray

    @property
    def shape(self):
        return self.spec_eff.shape

    @property
    def num_stations(self) -> int:
        return self.spec_eff.shape[0]

    @property
    def num_users(self) -> int:
        return self.spec_eff.shape[1]

    @property
    def admitted(self) -> np.ndarray:
        """Boolean mask of links that may carry a user."""
        return np.isfinite(self.demand)

    @classmethod
    def from_spec_eff(cls, spec_eff, rate_bps, distance_m=None) -> "LinkMatrix":
        """Build directly from a spectral-efficiency matrix (no radio model)."""
        spec_eff = np.asarray(spec_eff, dtype=float)
        if spec_eff.ndim != 2:
            raise InvalidInputError("spec_eff must be a matrix")
        if np.any(spec_eff < 0) or not np.all(np.isfinite(spec_eff)):
            raise InvalidInputError("spec_eff must be finite and non-negative")
        m, n = spec_eff.shape
        rate = np.broadcast_to(np.asarray(rate_bps, dtype=float), (n,)).copy()
        if distance_m is None:
            distance_m = np.zeros((m, n))
        return cls(
            rx_power_w=np.full((m, n), np.nan),
            spec_eff=spec_eff,
            demand=_demand(rate, spec_eff),
            distance_m=np.asarray(distance_m, dtype=float),
            rate_bps=rate,
        )


def dbm_to_watts(dbm):
    out = 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def path_loss_db(distance_m, cfg: RadioConfig):
    """Log-distance path loss in dB, distance in metres (clamped below)."""
    d = np.asarray(distance_m, dtype=float)
    if not np.all(np.isfinite(d)):
        raise InvalidInputError("distance must be finite")
    d = np.maximum(d, cfg.min_distance_m)
    loss = cfg.pathloss_intercept_db + cfg.pathloss_exponent_coeff * np.log10(d / 1000.0)
    return float(loss) if loss.ndim == 0 else loss


def received_power_w(bs_index, user_index, distance_m, shadow_db, cfg: RadioConfig):
    """Received power of station ``bs_index`` at user ``user_index``.

    The indices are informational only; the result depends on distance and the
    link's shadowing sample.
    """
    shadow_db = np.asarray(shadow_db, dtype=float)
    if not np.all(np.isfinite(shadow_db)):
        raise InvalidInputError("shadow_db must be finite")
    return dbm_to_watts(cfg.tx_power_dbm - path_loss_db(distance_m, cfg) - shadow_db)


def spectral_efficiency(p_signal_w, p_interference_sum_w, p_noise_w, cfg: RadioConfig):
    """bandwidth_eff * log2(1 + S / (sinr_eff * (I + N))) in bit/s/Hz."""
    s = np.asarray(p_signal_w, dtype=float)
    i = np.asarray(p_interference_sum_w, dtype=float)
    n = np.asarray(p_noise_w, dtype=float)
    if np.any(s < 0) or np.any(i < 0) or np.any(n < 0):
        raise InvalidInputError("powers must be non-negative")
    if np.any(n <= 0):
        raise InvalidInputError("noise power must be positive")
    out = cfg.bandwidth_eff * np.log2(1.0 + s / (cfg.sinr_eff * (i + n)))
    return float(out) if out.ndim == 0 else out


def draw_shadowing(rng, num_stations: int, num_users: int, sigma_db: float) -> np.ndarray:
    """One log-normal shadowing sample (dB) per link, held for the whole solve."""
    rng = np.random.default_rng(rng)
    return rng.normal(0.0, sigma_db, size=(num_stations, num_users)) if sigma_db > 0 \
        else np.zeros((num_stations, num_users))


def build_link_matrix(topology: NetworkTopology, users: UserSnapshot, cfg: RadioConfig,
                      shadow_samples) -> LinkMatrix:
    """Received powers, spectral efficiencies and bandwidth demands for all links.

    Interference at user j from station i is the sum of every other station's
    received power, i.e. all stations are assumed to transmit.
    """
    m, n = topology.num_stations, users.num_users
    if n == 0:
        raise InvalidInputError("need at least one user")
    shadow = np.asarray(shadow_samples, dtype=float)
    if shadow.shape != (m, n):
        raise InvalidInputError(f"shadow_samples has shape {shadow.shape}, expected {(m, n)}")
    dist = wrap_distance_matrix(topology.positions_m, users.positions_m, topology.extent_m)
    power = dbm_to_watts(cfg.tx_power_dbm - path_loss_db(dist, cfg) - shadow)
    interference = power.sum(axis=0, keepdims=True) - power
    # cancellation in the subtraction can leave tiny negatives
    interference = np.maximum(interference, 0.0)
    eff = spectral_efficiency(power, interference, cfg.noise_power_w, cfg)
    eff = np.asarray(eff).reshape(m, n)
    return LinkMatrix(
        rx_power_w=power,
        spec_eff=eff,
        demand=_demand(users.rate_bps, eff),
        distance_m=dist,
        rate_bps=np.array(users.rate_bps),
    )


def _demand(rate, eff):
    with np.errstate(divide="ignore"):
        return np.where(eff > 0, rate[None, :] / np.where(eff > 0, eff, 1.0), np.inf)
