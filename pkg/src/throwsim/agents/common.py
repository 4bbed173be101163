"""Pieces shared by the three learners: policies, replay, evaluation, curves."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .. import nn
from ..env import EVAL_SEED
from ..errors import DivergenceError, InvalidInputError

EVAL_EVERY = 1000
EVAL_EPISODES = 200

ReportFn = Callable[[int, float], bool]
"""Called as ``report(episode, score)`` at each evaluation; return True to stop."""


class BanditEnv(Protocol):
    obs_dim: int
    action_dim: int
    obs_low: np.ndarray
    obs_high: np.ndarray
    seed: int

    def sample(self, episodes, seed: int | None = None): ...

    def observe(self, batch) -> np.ndarray: ...

    def evaluate(self, batch, raw_actions) -> tuple[np.ndarray, np.ndarray]: ...


# policies ----------------------------------------------------------------------


def normalize_obs(obs, low, high) -> np.ndarray:
    width = high - low
    safe = np.where(width > 0, width, 1.0)
    return np.where(width > 0, 2.0 * (np.asarray(obs, dtype=float) - low) / safe - 1.0, 0.0)


@dataclass
class LearnedPolicy:
    """A trained actor plus everything needed to act with it.

    ``log_std`` is a vector for PPO's state-independent Gaussian, a
    ``(features, actions)`` matrix for gSDE policies, and unused otherwise.
    """

    tag: str
    actor: nn.Mlp
    obs_low: np.ndarray
    obs_high: np.ndarray
    hyperparams: object
    seed: int = 0
    env_digest: str = ""
    log_std: np.ndarray | None = None
    deterministic: bool = True

    @property
    def use_sde(self) -> bool:
        return bool(getattr(self.hyperparams, "use_sde", False))

    @property
    def action_dim(self) -> int:
        out = self.actor.sizes[-1]
        return out // 2 if self.tag == "sac" and not self.use_sde else out

    def normalize(self, obs) -> np.ndarray:
        return normalize_obs(obs, self.obs_low, self.obs_high)

    def act(self, obs, deterministic: bool | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
        deterministic = self.deterministic if deterministic is None else deterministic
        if not deterministic and rng is None:
            raise InvalidInputError("stochastic act needs an rng")
        x = self.normalize(obs)
        out, cache = self.actor.forward_cache(x)
        features = cache[-1][0]
        if self.tag == "td3":
            if deterministic:
                return out
            sigma = self.hyperparams.noise_std if self.hyperparams.noise_type == "normal" else 0.1
            return np.clip(out + sigma * rng.standard_normal(out.shape), -1.0, 1.0)
        if self.tag == "sac":
            if self.use_sde:
                mean = out
                if deterministic:
                    return np.tanh(mean)
                mat, _ = nn.gsde_sample_matrix(self.log_std, rng)
                return np.tanh(mean + features @ mat)
            mean, log_std = np.split(out, 2, axis=-1)
            if deterministic:
                return np.tanh(mean)
            log_std = np.clip(log_std, nn.LOG_STD_MIN, nn.LOG_STD_MAX)
            return np.tanh(mean + np.exp(log_std) * rng.standard_normal(mean.shape))
        if self.tag == "ppo":
            if deterministic:
                return np.clip(out, -1.0, 1.0)
            if self.use_sde:
                mat, _ = nn.gsde_sample_matrix(self.log_std, rng)
                return np.clip(out + features @ mat, -1.0, 1.0)
            return np.clip(out + np.exp(self.log_std) * rng.standard_normal(out.shape), -1.0, 1.0)
        raise InvalidInputError(f"unknown policy tag {self.tag!r}")


def env_digest(env) -> str:
    config = getattr(env, "config", None)
    return config.digest() if config is not None else ""


# replay ------------------------------------------------------------------------


class ReplayBuffer:
    """Ring buffer of (observation, action, reward); no next state is needed."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise InvalidInputError("ReplayBuffer: capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.rewards = np.zeros(self.capacity)
        self.pos = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, actions, rewards):
        obs = np.atleast_2d(obs)
        actions = np.atleast_2d(actions)
        rewards = np.atleast_1d(rewards)
        for o, a, r in zip(obs, actions, rewards):
            self.obs[self.pos] = o
            self.actions[self.pos] = a
            self.rewards[self.pos] = r
            self.pos = (self.pos + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.actions[idx], self.rewards[idx]


# environments --------------------------------------------------------------------


@dataclass(frozen=True)
class BanditBatch:
    episodes: np.ndarray
    contexts: np.ndarray

    def __len__(self):
        return len(self.episodes)

    def take(self, idx) -> "BanditBatch":
        return BanditBatch(self.episodes[idx], self.contexts[idx])


class SyntheticBandit:
    """Contextual bandit with a known optimum, reward ``-|a - a*(c)|^2``.

    Contexts are uniform in ``[-1, 1]^context_dim``; with ``context_dim=0`` the
    observation is a constant zero and the problem is context-free.
    """

    def __init__(self, optimum: Callable[[np.ndarray], np.ndarray], context_dim: int = 1,
                 action_dim: int = 1, seed: int = 0, tolerance: float = 0.1):
        self.optimum = optimum
        self.context_dim = context_dim
        self.obs_dim = max(context_dim, 1)
        self.action_dim = action_dim
        self.seed = int(seed)
        self.tolerance = tolerance
        self.obs_low = -np.ones(self.obs_dim)
        self.obs_high = np.ones(self.obs_dim)

    @classmethod
    def sine(cls, seed: int = 0) -> "SyntheticBandit":
        return cls(np.sin, context_dim=1, action_dim=1, seed=seed)

    @classmethod
    def constant(cls, target: float = 0.3, seed: int = 0) -> "SyntheticBandit":
        return cls(lambda c: np.full((len(c), 1), target), context_dim=0, action_dim=1, seed=seed)

    def sample(self, episodes, seed: int | None = None) -> BanditBatch:
        seed = self.seed if seed is None else seed
        episodes = np.asarray(episodes, dtype=np.int64)
        if self.context_dim == 0:
            return BanditBatch(episodes, np.zeros((len(episodes), 1)))
        contexts = np.array([np.random.default_rng([seed, int(i)]).uniform(-1.0, 1.0, self.context_dim)
                             for i in episodes]).reshape(len(episodes), self.context_dim)
        return BanditBatch(episodes, contexts)

    def observe(self, batch: BanditBatch) -> np.ndarray:
        return batch.contexts

    def target(self, batch: BanditBatch) -> np.ndarray:
        return np.asarray(self.optimum(batch.contexts), dtype=float).reshape(len(batch), self.action_dim)

    def evaluate(self, batch: BanditBatch, raw_actions):
        err = np.asarray(raw_actions, dtype=float).reshape(len(batch), self.action_dim) - self.target(batch)
        return -np.sum(err * err, axis=-1), np.max(np.abs(err), axis=-1) < self.tolerance


class EpisodeStream:
    """Training episodes fetched in blocks so per-call overhead stays low."""

    def __init__(self, env: BanditEnv, seed: int, block: int = 2048):
        self.env = env
        self.seed = seed
        self.block = block
        self._start = None
        self._batch = None

    def get(self, start: int, n: int):
        b0 = (start // self.block) * self.block
        if start + n > b0 + self.block:
            return self.env.sample(np.arange(start, start + n), seed=self.seed)
        if self._start != b0:
            self._batch = self.env.sample(np.arange(b0, b0 + self.block), seed=self.seed)
            self._start = b0
        return self._batch.take(slice(start - b0, start - b0 + n))


# evaluation & curves -------------------------------------------------------------


@dataclass
class LearningCurve:
    episodes: list = field(default_factory=list)
    mean_reward: list = field(default_factory=list)
    success_rate: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, episode: int, reward: float, success: float):
        self.episodes.append(int(episode))
        self.mean_reward.append(float(reward))
        self.success_rate.append(float(success))

    def __len__(self):
        return len(self.episodes)

    def rows(self):
        return list(zip(self.episodes, self.mean_reward, self.success_rate))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "mean_eval_reward", "success_rate"])
            for e, r, s in self.rows():
                writer.writerow([e, repr(r), repr(s)])

    @classmethod
    def from_csv(cls, path) -> "LearningCurve":
        curve = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                curve.append(int(row["episode"]), float(row["mean_eval_reward"]), float(row["success_rate"]))
        return curve


def evaluate_policy(env: BanditEnv, batch, policy: LearnedPolicy) -> tuple[float, float]:
    actions = policy.act(env.observe(batch), deterministic=True)
    rewards, success = env.evaluate(batch, actions)
    return float(np.mean(rewards)), float(np.mean(success))


class Schedule:
    """Periodic deterministic evaluation on a fixed held-out block of episodes."""

    def __init__(self, env: BanditEnv, eval_every: int = EVAL_EVERY, eval_episodes: int = EVAL_EPISODES,
                 report: ReportFn | None = None):
        if eval_every < 1:
            raise InvalidInputError("eval_every must be >= 1")
        self.env = env
        self.eval_every = eval_every
        self.block = env.sample(np.arange(eval_episodes), seed=EVAL_SEED)
        self.report = report
        self.curve = LearningCurve()
        self._next = 0

    def due(self, done: int, total: int) -> bool:
        return done >= self._next or done >= total

    def evaluate(self, done: int, policy: LearnedPolicy) -> bool:
        """Record a curve point; returns True when the caller should stop."""
        reward, success = evaluate_policy(self.env, self.block, policy)
        if not np.isfinite(reward):
            raise DivergenceError(f"non-finite evaluation reward at episode {done}")
        self.curve.append(done, reward, success)
        self._next = (done // self.eval_every + 1) * self.eval_every
        if self.report is not None and done > 0:
            return bool(self.report(done, reward))
        return False


@dataclass
class TrainResult:
    policy: LearnedPolicy
    curve: LearningCurve
    agent: object = None
    stopped_early: bool = False


# off-policy loop -----------------------------------------------------------------


class OrnsteinUhlenbeck:
    """Ornstein-Uhlenbeck action noise, reset at the start of every episode.

    Episodes last a single step, so each draw starts from zero and the
    effective noise is Gaussian with std ``sigma * sqrt(dt)``.
    """

    def __init__(self, sigma: float, size: int, theta: float = 0.15, dt: float = 1e-2):
        self.sigma, self.theta, self.dt = sigma, theta, dt
        self.state = np.zeros(size)

    def reset(self):
        self.state[:] = 0.0

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        self.state = (self.state - self.theta * self.state * self.dt
                      + self.sigma * np.sqrt(self.dt) * rng.standard_normal(self.state.shape))
        return self.state.copy()


def run_off_policy(agent, env: BanditEnv, hp, episodes: int, seed: int, eval_every: int = EVAL_EVERY,
                   eval_episodes: int = EVAL_EPISODES, report: ReportFn | None = None) -> TrainResult:
    """Collect ``train_freq`` episodes, then take ``gradient_steps`` updates.

    Until ``learning_starts`` episodes have been collected, actions are drawn
    uniformly from the action box and no updates happen.
    """
    if episodes < 1:
        raise InvalidInputError("episodes must be >= 1")
    explore_rng = np.random.default_rng([seed, 1])
    replay_rng = np.random.default_rng([seed, 2])
    buffer = ReplayBuffer(min(int(hp.buffer_size), episodes), env.obs_dim, env.action_dim)
    stream = EpisodeStream(env, seed)
    schedule = Schedule(env, eval_every, eval_episodes, report)
    stopped = schedule.evaluate(0, agent.policy())
    done = 0
    while done < episodes and not stopped:
        n = min(int(hp.train_freq), episodes - done)
        batch = stream.get(done, n)
        obs = env.observe(batch)
        if done < hp.learning_starts:
            actions = explore_rng.uniform(-1.0, 1.0, (n, env.action_dim))
        else:
            actions = agent.explore(obs, explore_rng)
        rewards, _ = env.evaluate(batch, actions)
        buffer.add(agent.normalize(obs), actions, rewards)
        done += n
        if done > hp.learning_starts:
            for _ in range(int(hp.gradient_steps)):
                agent.update(*buffer.sample(int(hp.batch_size), replay_rng))
        if schedule.due(done, episodes):
            agent.check()
            stopped = schedule.evaluate(done, agent.policy())
    return TrainResult(agent.policy(copy=True), schedule.curve, agent, stopped_early=stopped)
