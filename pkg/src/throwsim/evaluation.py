"""Policy evaluation: the comparison-table metrics and their rendering.

All policies compared in one call see the same episodes (contexts, hidden
scenes and release-noise draws), so differences between rows come from the
policies alone.  Times and rewards are stored in seconds and rendered in
milliseconds.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from . import env as env_mod
from .env import EnvConfig, EpisodeBatch
from .errors import InvalidInputError
from .motion import RobotSpec


@dataclass(frozen=True)
class EpisodeArrays:
    """Per-episode results of one policy, as parallel arrays."""

    seed: int
    episodes: np.ndarray
    context: np.ndarray
    command: np.ndarray
    success: np.ndarray
    time: np.ndarray
    landing: np.ndarray
    reward: np.ndarray
    release_lag: np.ndarray

    def __len__(self):
        return len(self.episodes)

    def rows(self):
        for i in range(len(self)):
            yield [
                self.seed, int(self.episodes[i]), *map(float, self.context[i]), *map(float, self.command[i]),
                int(bool(self.success[i])), float(self.time[i]), *map(float, self.landing[i]),
                float(self.reward[i]),
            ]

    def to_csv(self, path) -> int:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(env_mod.CSV_COLUMNS)
            for row in self.rows():
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return len(self)

    @classmethod
    def from_csv(cls, path) -> "EpisodeArrays":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise InvalidInputError(f"{path}: no episodes")
        col = lambda *names: np.array([[float(r[n]) for n in names] for r in rows])  # noqa: E731
        return cls(
            seed=int(rows[0]["seed"]),
            episodes=np.array([int(r["episode"]) for r in rows]),
            context=col("object_x", "object_y", "bin_x", "bin_y"),
            command=col("release_fraction", "speed", "target_height", "target_reach"),
            success=np.array([bool(int(r["success"])) for r in rows]),
            time=col("time_s")[:, 0],
            landing=col("landing_x", "landing_y"),
            reward=col("reward")[:, 0],
            release_lag=np.full(len(rows), np.nan),
        )


@dataclass(frozen=True)
class Metrics:
    label: str
    n_episodes: int
    mean_reward: float
    std_reward: float
    success_rate: float
    mean_time: float
    std_time: float
    distance_ratio: float
    mean_impact_distance: float
    std_impact_distance: float

    @classmethod
    def from_episodes(cls, ep: EpisodeArrays, label: str = "") -> "Metrics":
        if len(ep) < 1:
            raise InvalidInputError("Metrics: need at least one episode")
        obj, bin_xy = ep.context[:, 0:2], ep.context[:, 2:4]
        target = obj + ep.command[:, 3:4] * (bin_xy - obj)
        full = np.linalg.norm(bin_xy - obj, axis=1)
        travel = np.linalg.norm(target - obj, axis=1)
        ratio = np.where(full > 0, travel / np.where(full > 0, full, 1.0), 1.0)
        impact = np.linalg.norm(ep.landing - bin_xy, axis=1)
        return cls(
            label=label,
            n_episodes=len(ep),
            mean_reward=float(np.mean(ep.reward)),
            std_reward=float(np.std(ep.reward)),
            success_rate=float(np.mean(ep.success)),
            mean_time=float(np.mean(ep.time)),
            std_time=float(np.std(ep.time)),
            distance_ratio=float(np.mean(ratio)),
            mean_impact_distance=float(np.mean(impact)),
            std_impact_distance=float(np.std(impact)),
        )

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def sample_blocks(config: EnvConfig, seed: int, n: int, block: int = env_mod.ROLLOUT_BLOCK) -> list[EpisodeBatch]:
    if n < 1:
        raise InvalidInputError("evaluation needs n >= 1 episodes")
    return [env_mod.sample_episodes(config, seed, np.arange(s, min(n, s + block))) for s in range(0, n, block)]


def rollout(policy, blocks: list[EpisodeBatch], config: EnvConfig, robot: RobotSpec, baseline,
            deterministic: bool = True) -> EpisodeArrays:
    """Run ``policy`` on pre-sampled episode blocks."""
    parts = []
    for k, batch in enumerate(blocks):
        rng = np.random.default_rng([int(batch.seed), k, 1])
        command = env_mod.policy_commands(policy, batch.context, config, robot, deterministic, rng)
        outcome = env_mod.simulate_episodes(batch, command, robot, config)
        reward = env_mod.compute_reward(outcome, batch.context, baseline)
        parts.append((batch, command, outcome, reward))
    cat = lambda f: np.concatenate([f(p) for p in parts])  # noqa: E731
    return EpisodeArrays(
        seed=int(blocks[0].seed),
        episodes=cat(lambda p: p[0].episodes),
        context=cat(lambda p: p[0].context.as_array()),
        command=cat(lambda p: p[1].as_array()),
        success=cat(lambda p: np.asarray(p[2].success)),
        time=cat(lambda p: np.asarray(p[2].action_time)),
        landing=cat(lambda p: np.asarray(p[2].landing)),
        reward=cat(lambda p: np.asarray(p[3])),
        release_lag=cat(lambda p: np.asarray(p[2].release_lag)),
    )


def policy_label(policy) -> str:
    return getattr(policy, "tag", type(policy).__name__)


def evaluate(policy, n: int, config: EnvConfig, seed: int, robot: RobotSpec | None = None, baseline=None,
             label: str | None = None) -> Metrics:
    """Deterministic-mode metrics of ``policy`` over ``n`` episodes."""
    robot = RobotSpec() if robot is None else robot
    ep = rollout(policy, sample_blocks(config, seed, n), config, robot, baseline)
    return Metrics.from_episodes(ep, policy_label(policy) if label is None else label)


@dataclass
class ComparisonTable:
    rows: list
    episodes: list

    HEADER = ("policy", "reward_ms", "reward_std_ms", "success_pct", "time_ms", "time_std_ms",
              "distance_ratio_pct", "impact_cm", "impact_std_cm", "n")

    def __len__(self):
        return len(self.rows)

    def formatted(self) -> list[list[str]]:
        out = []
        for m in self.rows:
            out.append([
                m.label, f"{1e3 * m.mean_reward:.1f}", f"{1e3 * m.std_reward:.1f}", f"{100 * m.success_rate:.2f}",
                f"{1e3 * m.mean_time:.1f}", f"{1e3 * m.std_time:.1f}", f"{100 * m.distance_ratio:.1f}",
                f"{100 * m.mean_impact_distance:.2f}", f"{100 * m.std_impact_distance:.2f}", str(m.n_episodes),
            ])
        return out

    def render(self) -> str:
        """Aligned plain-text table."""
        rows = [list(self.HEADER)] + self.formatted()
        widths = [max(len(r[i]) for r in rows) for i in range(len(self.HEADER))]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
                 for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.HEADER)
            writer.writerows(self.formatted())


def compare(policies, n: int, config: EnvConfig, seed: int, robot: RobotSpec | None = None, baseline=None,
            labels: list[str] | None = None) -> ComparisonTable:
    """Paired evaluation: every policy is run on the same ``n`` episodes."""
    policies = list(policies)
    if not policies:
        raise InvalidInputError("compare needs at least one policy")
    if labels is not None and len(labels) != len(policies):
        raise InvalidInputError("compare: one label per policy")
    robot = RobotSpec() if robot is None else robot
    blocks = sample_blocks(config, seed, n)
    rows, episodes = [], []
    for i, policy in enumerate(policies):
        ep = rollout(policy, blocks, config, robot, baseline)
        label = labels[i] if labels is not None else policy_label(policy)
        rows.append(Metrics.from_episodes(ep, label))
        episodes.append(ep)
    return ComparisonTable(rows, episodes)
