"""Run configuration: one YAML file, sections ``scenario``, ``radio``, ``solver``.

Every key is optional; missing keys take the defaults below (the 10 x 10 grid
evaluation setup). Unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional

import yaml

from sparsesleep.errors import ConfigError, SparseSleepError
from sparsesleep.mm import MMConfig
from sparsesleep.radio import RadioConfig
from sparsesleep.scenario import HotspotSpec

__all__ = ["RunConfig", "ScenarioConfig", "SolverConfig", "load_config"]


@dataclass(frozen=True)
class ScenarioConfig:
    rows: int = 10
    cols: int = 10
    spacing_m: float = 500.0
    bandwidth_hz: float = 5e6
    static_power_w: float = 400.0
    rate_bps: float = 122e3
    mean_users: float = 400.0
    mean_users_list: Optional[List[float]] = None
    seed: int = 0
    hotspots: HotspotSpec = field(default_factory=HotspotSpec)

    @property
    def load_levels(self) -> List[float]:
        return list(self.mean_users_list) if self.mean_users_list else [self.mean_users]


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-3
    epsilon_star: float = 1e-3
    max_iters: int = 20
    leftover_policy: str = "reuse"

    def mm(self) -> MMConfig:
        return MMConfig(epsilon=self.epsilon, epsilon_star=self.epsilon_star,
                        max_iters=self.max_iters)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    realizations: int = 10
    output_dir: str = "out"
    enable_bruteforce: bool = False
    jobs: int = 1

    def __post_init__(self):
        if int(self.realizations) < 1:
            raise ConfigError("realizations must be >= 1")
        if int(self.jobs) < 1:
            raise ConfigError("jobs must be >= 1")
        sc = self.scenario
        if sc.rows < 1 or sc.cols < 1 or not sc.spacing_m > 0:
            raise ConfigError("grid needs rows, cols >= 1 and a positive spacing")
        if not (sc.bandwidth_hz > 0 and sc.static_power_w > 0 and sc.rate_bps > 0):
            raise ConfigError("bandwidth_hz, static_power_w and rate_bps must be positive")
        if any(not v > 0 for v in sc.load_levels):
            raise ConfigError("mean user counts must be positive")
        if self.solver.leftover_policy not in ("reuse", "activate"):
            raise ConfigError("solver.leftover_policy must be 'reuse' or 'activate'")
        try:
            self.solver.mm()
        except SparseSleepError as exc:
            raise ConfigError(f"solver: {exc}") from exc

    def replace(self, **changes) -> "RunConfig":
        """Copy with top-level or dotted (``scenario.seed``) fields replaced."""
        top, nested = {}, {}
        for key, value in changes.items():
            if "." in key:
                section, name = key.split(".", 1)
                nested.setdefault(section, {})[name] = value
            else:
                top[key] = value
        for section, values in nested.items():
            top[section] = _build(type(getattr(self, section)),
                                  {**dataclasses.asdict(getattr(self, section)), **values}, section)
        try:
            return dataclasses.replace(self, **top)
        except SparseSleepError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(value, annotation, where):
    """YAML 1.1 reads ``1e-3`` as a string; accept that for numeric fields."""
    if value is None:
        return None
    ann = str(annotation)
    if ann.startswith("Optional[") and ann.endswith("]"):
        ann = ann[len("Optional["):-1]
    try:
        if ann in ("float", "<class 'float'>"):
            return float(value)
        if ann in ("int", "<class 'int'>"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if ann in ("bool", "<class 'bool'>"):
            if not isinstance(value, bool):
                raise ValueError
            return value
        if "List[float]" in ann:
            return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot interpret {value!r} as {ann}") from None
    return value


def _build(cls, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        sub = f"{where}.{name}"
        if f.name == "hotspots":
            kwargs[name] = value if isinstance(value, HotspotSpec) else _build(HotspotSpec, value, sub)
        elif f.name in ("scenario", "radio", "solver") and cls is RunConfig:
            target = {"scenario": ScenarioConfig, "radio": RadioConfig, "solver": SolverConfig}[name]
            kwargs[name] = value if isinstance(value, target) else _build(target, value, sub)
        else:
            kwargs[name] = _coerce(value, f.type, sub)
    try:
        return cls(**kwargs)
    except SparseSleepError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path=None, data: Optional[dict] = None) -> RunConfig:
    """Parse a YAML file (or an already-loaded mapping) into a RunConfig."""
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return _build(RunConfig, data or {}, "config")
