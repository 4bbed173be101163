"""Hyperparameter sets for the three learners and their named presets.

``sb3`` presets are the library defaults the algorithms ship with; ``optuna``
presets are the tuned values found by the hyperparameter study.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import InvalidInputError


@dataclass(frozen=True)
class _Params:
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidInputError(f"{cls.__name__}: unknown fields {sorted(unknown)}")
        d = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**d)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TD3Params(_Params):
    learning_rate: float = 1e-3
    batch_size: int = 100
    tau: float = 0.005
    train_freq: int = 1
    noise_type: str | None = None
    noise_std: float | None = None
    net_arch: tuple = (400, 300)
    learning_starts: int = 100
    gradient_steps: int = 1
    policy_delay: int = 2
    buffer_size: int = 1_000_000


@dataclass(frozen=True)
class SACParams(_Params):
    learning_rate: float = 3e-4
    batch_size: int = 256
    learning_starts: int = 100
    train_freq: int = 1
    tau: float = 0.005
    log_std_init: float = -3.0
    use_sde: bool = False
    sde_sample_freq: int = -1
    net_arch: tuple = (256, 256)
    gradient_steps: int = 1
    buffer_size: int = 1_000_000
    target_entropy: float | None = None


@dataclass(frozen=True)
class PPOParams(_Params):
    learning_rate: float = 3e-4
    batch_size: int = 64
    ent_coef: float = 0.0
    clip_range: float = 0.2
    n_steps: int = 2048
    n_epochs: int = 10
    gae_lambda: float = 0.95
    max_grad_norm: float = 0.5
    vf_coef: float = 0.5
    use_sde: bool = False
    sde_sample_freq: int = -1
    net_arch: tuple = (64, 64)
    log_std_init: float = 0.0
    activation: str = "tanh"


PARAM_TYPES = {"td3": TD3Params, "sac": SACParams, "ppo": PPOParams}

PRESETS = {
    ("td3", "sb3"): TD3Params(),
    ("td3", "optuna"): TD3Params(
        learning_rate=0.0066, batch_size=512, tau=0.02, train_freq=8,
        noise_type="ornstein-uhlenbeck", noise_std=0.673, net_arch=(256, 256),
    ),
    ("sac", "sb3"): SACParams(),
    ("sac", "optuna"): SACParams(
        learning_rate=0.0016, batch_size=16, learning_starts=100, train_freq=4, tau=0.005,
        log_std_init=-0.075, use_sde=True, sde_sample_freq=8, net_arch=(256, 256),
    ),
    ("ppo", "sb3"): PPOParams(),
    ("ppo", "optuna"): PPOParams(
        learning_rate=0.0067, batch_size=32, ent_coef=6.92e-08, clip_range=0.4, n_steps=256,
        n_epochs=5, gae_lambda=0.95, max_grad_norm=0.8, vf_coef=0.49, use_sde=True,
        sde_sample_freq=16, net_arch=(400, 300), log_std_init=-0.52, activation="tanh",
    ),
}


def preset(algo: str, name: str):
    try:
        return PRESETS[(algo, name)]
    except KeyError:
        raise InvalidInputError(f"unknown preset {name!r} for algorithm {algo!r}") from None


def params_from_dict(algo: str, d: dict):
    if algo not in PARAM_TYPES:
        raise InvalidInputError(f"unknown algorithm {algo!r}")
    return PARAM_TYPES[algo].from_dict(d)
