"""Learned and scripted throwing policies."""
from __future__ import annotations

import numpy as np

from ..env import Context
from ..errors import InvalidInputError
from .common import LearnedPolicy, LearningCurve, ReplayBuffer, SyntheticBandit, TrainResult
from .hyperparams import PARAM_TYPES, PRESETS, PPOParams, SACParams, TD3Params, params_from_dict, preset
from .ppo import ppo_train
from .sac import sac_train
from .scripted import HassanPolicy, PapPolicy, hassan_solve, pap_policy
from .td3 import td3_train

TRAINERS = {"td3": td3_train, "sac": sac_train, "ppo": ppo_train}


def act(policy, context, deterministic: bool = True, rng: np.random.Generator | None = None) -> np.ndarray:
    """Raw action(s) in [-1, 1]^4 of any policy for a context or context array."""
    c = context.as_array() if isinstance(context, Context) else np.asarray(context, dtype=float)
    return np.clip(policy.act(c, deterministic=deterministic, rng=rng), -1.0, 1.0)


def train(algo: str, env, hp=None, episodes: int = 500_000, seed: int = 0, **kw) -> TrainResult:
    if algo not in TRAINERS:
        raise InvalidInputError(f"unknown algorithm {algo!r}")
    return TRAINERS[algo](env, hp, episodes, seed, **kw)


__all__ = [
    "HassanPolicy", "LearnedPolicy", "LearningCurve", "PARAM_TYPES", "PPOParams", "PRESETS", "PapPolicy",
    "ReplayBuffer", "SACParams", "SyntheticBandit", "TD3Params", "TRAINERS", "TrainResult", "act",
    "hassan_solve", "pap_policy", "params_from_dict", "ppo_train", "preset", "sac_train", "td3_train", "train",
]
