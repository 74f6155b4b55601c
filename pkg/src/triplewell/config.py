"""Experiment configuration: INI files with [model], [task] and [output] sections.

Example::

    [model]
    U = 0.7
    J = 1.0
    epsilon = 1.5
    N = 120

    [task]
    target = 0.0752
    width = 0.02

    [output]
    out = results
    cache = results/cache
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .spectra import ModelParams


class ConfigError(ValueError):
    pass


@dataclass
class TaskConfig:
    """Task settings shared by the subcommands; each subcommand reads the fields it needs."""

    recipe: str = ""
    target: float = 0.0752  # scaled energy E/N the experiment is organised around
    width: float = 0.0  # energy window in E/N; 0 means unused
    count: int = 0  # number of eigenstates or seeds; 0 means unused
    index: int = -1  # explicit eigenstate index; -1 means select by target
    entropy_window: int = 200
    t_final: float = 1.0e4
    t_short: float = 100.0
    sample_dt: float = 0.01
    seeds: int = 460
    bins: int = 200
    phi_section: float = 0.0
    direction: str = "both"
    phase_points: int = 0  # 0 means 2N+2
    husimi: bool = False
    top: bool = False  # project: export top components instead of a grid
    subset_margin: float = 0.0  # diagonalise only |E/N - target| <= margin; 0 means full spectrum
    power: float = 0.0  # display exponent; 0 means none
    per_state: int = 20
    tolerance: float = 1e-12
    random_seed: int = 0  # reserved for randomised ensembles; current pipelines are deterministic

    def __post_init__(self):
        if self.direction not in ("both", "positive", "negative"):
            raise ConfigError(f"direction must be both, positive or negative, not {self.direction!r}")
        for name in ("t_final", "t_short", "sample_dt", "tolerance"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if min(self.width, self.count, self.power, self.phase_points, self.subset_margin) < 0:
            raise ConfigError("width, count, power, phase_points and subset_margin must be non-negative")
        if self.bins < 2:
            raise ConfigError("bins must be at least 2")
        if self.seeds < 1 or self.per_state < 1 or self.entropy_window < 1:
            raise ConfigError("seeds, per_state and entropy_window must be positive")


@dataclass
class OutputConfig:
    out: str = "results"
    cache: str = ""  # empty means <out>/cache
    plot: bool = False

    @property
    def cache_dir(self) -> Path:
        return Path(self.cache) if self.cache else Path(self.out) / "cache"


@dataclass
class ExperimentConfig:
    model: ModelParams = field(default_factory=ModelParams)
    task: TaskConfig = field(default_factory=TaskConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return {
            "model": dataclasses.asdict(self.model),
            "task": dataclasses.asdict(self.task),
            "output": dataclasses.asdict(self.output),
        }

    def hash(self) -> str:
        """Digest of the model and task settings; output locations do not change the hash."""
        payload = {"model": dataclasses.asdict(self.model), "task": dataclasses.asdict(self.task)}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for section, values in self.to_dict().items():
            cp[section] = {k: str(v) for k, v in values.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def with_overrides(self, section: str, **values) -> "ExperimentConfig":
        """Copy with fields of one section replaced; ``None`` values are ignored."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        current = getattr(self, section)
        try:
            if section == "model":
                new = current.replace(**values)
            else:
                new = dataclasses.replace(current, **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return dataclasses.replace(self, **{section: new})


_SECTIONS = {"model": ModelParams, "task": TaskConfig, "output": OutputConfig}


def _coerce(cls, key: str, raw: str):
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    if key not in types:
        raise ConfigError(f"unknown key {key!r} in [{cls.__name__}]")
    t = types[key]
    try:
        if t in ("bool", bool):
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if t in ("int", int):
            return int(raw)
        if t in ("float", float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}") from exc


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = ExperimentConfig()
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        values = {k: _coerce(_SECTIONS[name], k, v) for k, v in cp[name].items()}
        cfg = cfg.with_overrides(name, **values)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
