"""Toolkit configuration file (YAML).

Example::

    seed: 0
    robot:
      max_speed: 10.0
      max_accel: 100.0
    env:
      rim_height: 0.10
      bin_half_extent: [0.20, 0.20]
    noise:
      speed_sigma: 0.05
      angle_sigma_deg: 3.0
    paths:
      out_dir: runs

Every section is optional; missing fields take their defaults.  ``noise`` may
also be given inside ``env``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .env import EnvConfig
from .errors import InvalidInputError
from .motion import RobotSpec
from .physics import NoiseSpec

SECTIONS = ("seed", "robot", "env", "noise", "paths")


class ConfigError(InvalidInputError):
    """A configuration value is missing, unknown or outside its domain."""


def _build(cls, section: str, values):
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"{section}: expected a mapping, got {type(values).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"{section}: unknown field(s) {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


@dataclass(frozen=True)
class ToolkitConfig:
    robot: RobotSpec = field(default_factory=RobotSpec)
    env: EnvConfig = field(default_factory=EnvConfig)
    seed: int = 0
    paths: dict = field(default_factory=dict)

    @property
    def noise(self) -> NoiseSpec:
        return self.env.noise

    @classmethod
    def from_dict(cls, d: dict | None) -> "ToolkitConfig":
        d = {} if d is None else d
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a mapping")
        unknown = sorted(set(d) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"config: unknown section(s) {', '.join(unknown)}; expected {', '.join(SECTIONS)}")
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed: {seed!r} outside domain (integer >= 0)")
        env_values = dict(d.get("env") or {})
        if "noise" in d:
            if "noise" in env_values:
                raise ConfigError("noise: given both at top level and inside env")
            env_values["noise"] = _build(NoiseSpec, "noise", d["noise"])
        elif isinstance(env_values.get("noise"), dict):
            env_values["noise"] = _build(NoiseSpec, "env.noise", env_values["noise"])
        paths = d.get("paths") or {}
        if not isinstance(paths, dict) or not all(isinstance(v, str) for v in paths.values()):
            raise ConfigError("paths: expected a mapping of names to path strings")
        return cls(
            robot=_build(RobotSpec, "robot", d.get("robot")),
            env=_build(EnvConfig, "env", env_values),
            seed=seed,
            paths=dict(paths),
        )

    def to_dict(self) -> dict:
        env = self.env.to_dict()
        noise = env.pop("noise")
        return {"seed": self.seed, "robot": dataclasses.asdict(self.robot), "env": env, "noise": noise,
                "paths": dict(self.paths)}


def load_config(path) -> ToolkitConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return ToolkitConfig.from_dict(data)


def dump_config(config: ToolkitConfig, path):
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)
