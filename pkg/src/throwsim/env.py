"""Contextual-bandit throwing environment.

One episode is one throw: a context (object and bin positions) is shown to
the policy, the policy answers with a 4-vector in [-1, 1]^4, the throw is
simulated against a hidden randomised scene and the episode ends.

Episode ``i`` of a run seeded with ``seed`` draws all its randomness from
``numpy.random.default_rng([seed, i])``, so results never depend on how
episodes are batched or distributed.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator, Protocol

import numpy as np

from . import physics
from .errors import ConfigurationError, InvalidInputError
from .motion import RobotSpec
from .physics import BinSpec, GripperSpec, NoiseSpec, ObjectSpec, ThrowOutcome

EVAL_SEED = 2_147_483_647
"""Seed of the held-out episode block used for evaluation during training."""

CSV_COLUMNS = (
    "seed", "episode",
    "object_x", "object_y", "bin_x", "bin_y",
    "release_fraction", "speed", "target_height", "target_reach",
    "success", "time_s", "landing_x", "landing_y", "reward",
)


@dataclass(frozen=True)
class Context:
    """Policy-visible state: object and bin positions on the plane (m)."""

    object_xy: np.ndarray
    bin_xy: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "object_xy", np.asarray(self.object_xy, dtype=float))
        object.__setattr__(self, "bin_xy", np.asarray(self.bin_xy, dtype=float))

    @classmethod
    def from_array(cls, c) -> "Context":
        c = np.asarray(c, dtype=float)
        return cls(c[..., 0:2], c[..., 2:4])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.object_xy, self.bin_xy], axis=-1)

    def __len__(self):
        return self.object_xy.shape[0]

    def __getitem__(self, i) -> "Context":
        return Context(self.object_xy[i], self.bin_xy[i])


@dataclass(frozen=True)
class ThrowCommand:
    """Decoded action.

    ``release_fraction`` locates the open signal along the pick->target line,
    ``target_reach`` the target along the pick->bin horizontal segment, and
    ``target_height`` is measured above the bin rim.
    """

    release_fraction: np.ndarray
    speed: np.ndarray
    target_height: np.ndarray
    target_reach: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack(
            [np.asarray(getattr(self, f.name), dtype=float) for f in dataclasses.fields(self)], axis=-1
        )

    @classmethod
    def from_array(cls, a) -> "ThrowCommand":
        a = np.asarray(a, dtype=float)
        return cls(a[..., 0], a[..., 1], a[..., 2], a[..., 3])

    def __getitem__(self, i) -> "ThrowCommand":
        return ThrowCommand.from_array(self.as_array()[i])


@dataclass(frozen=True)
class Scene:
    """Hidden per-episode nuisance state."""

    object: ObjectSpec
    gripper: GripperSpec
    bin: BinSpec

    @classmethod
    def stack(cls, scenes) -> "Scene":
        """Struct-of-arrays view of a list of scenes."""
        def col(get):
            return np.array([get(s) for s in scenes], dtype=float)

        clearances = [s.gripper.release_clearance for s in scenes]
        if all(c is None for c in clearances):
            clearance = None
        elif any(c is None for c in clearances):
            raise InvalidInputError("Scene.stack: cannot mix release models")
        else:
            clearance = np.array(clearances, dtype=float)

        return cls(
            object=ObjectSpec(col(lambda s: s.object.mass), col(lambda s: s.object.side),
                              col(lambda s: s.object.com_offset)),
            gripper=GripperSpec(col(lambda s: s.gripper.pre_open_delay),
                                col(lambda s: s.gripper.full_open_delay),
                                col(lambda s: s.gripper.stroke),
                                clearance),
            bin=BinSpec(col(lambda s: s.bin.center), col(lambda s: s.bin.rim_height),
                        col(lambda s: s.bin.half_extent_x), col(lambda s: s.bin.half_extent_y)),
        )

    def take(self, idx) -> "Scene":
        """Sub-batch of a stacked scene."""
        o, g, b = self.object, self.gripper, self.bin
        clearance = None if g.release_clearance is None else g.release_clearance[idx]
        return Scene(
            ObjectSpec(o.mass[idx], o.side[idx], o.com_offset[idx]),
            GripperSpec(g.pre_open_delay[idx], g.full_open_delay[idx], g.stroke[idx], clearance),
            BinSpec(b.center[idx], b.rim_height[idx], b.half_extent_x[idx], b.half_extent_y[idx]),
        )

    def __getitem__(self, i) -> "Scene":
        o, g, b = self.object, self.gripper, self.bin
        return Scene(
            ObjectSpec(float(o.mass[i]), float(o.side[i]), o.com_offset[i]),
            GripperSpec(float(g.pre_open_delay[i]), float(g.full_open_delay[i]), float(g.stroke[i]),
                        None if g.release_clearance is None else float(g.release_clearance[i])),
            BinSpec(b.center[i], float(b.rim_height[i]), float(b.half_extent_x[i]), float(b.half_extent_y[i])),
        )


def _pair(x):
    return tuple(float(v) for v in x)


@dataclass(frozen=True)
class EnvConfig:
    """Randomisation ranges, action bounds and noise of the environment.

    Positions are in metres in a frame whose x axis runs along the conveyor
    and whose origin sits at the centre of the pick window.
    """

    bin_area_origin: tuple = (-0.30, 0.45)
    bin_area_size: tuple = (0.60, 0.70)
    pick_window_origin: tuple = (-0.25, -0.15)
    pick_window_size: tuple = (0.50, 0.30)
    pre_open_delay: tuple = (0.010, 0.002)
    full_open_delay: tuple = (0.171, 0.005)
    stroke: float = 0.040
    release_clearance: float | None = 0.010
    mass_range: tuple = (0.01, 0.05)
    side_range: tuple = (0.03, 0.06)
    com_fraction: float = 0.25
    rim_height: float = 0.10
    bin_half_extent: tuple = (0.20, 0.20)
    release_bounds: tuple = (0.0, 1.0)
    speed_bounds: tuple = (0.5, 10.0)
    height_bounds: tuple = (0.02, 0.5)
    reach_bounds: tuple = (0.05, 1.0)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        for name in ("bin_area_origin", "bin_area_size", "pick_window_origin", "pick_window_size",
                     "pre_open_delay", "full_open_delay", "mass_range", "side_range", "bin_half_extent",
                     "release_bounds", "speed_bounds", "height_bounds", "reach_bounds"):
            object.__setattr__(self, name, _pair(getattr(self, name)))
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseSpec(**self.noise))
        self.validate()

    def validate(self):
        def check(ok, name, domain):
            if not ok:
                raise InvalidInputError(f"EnvConfig.{name}={getattr(self, name)!r} outside domain {domain}")

        for name in ("bin_area_size", "pick_window_size"):
            check(min(getattr(self, name)) >= 0, name, "sizes >= 0")
        for name in ("mass_range", "side_range", "release_bounds", "speed_bounds", "height_bounds",
                     "reach_bounds"):
            lo, hi = getattr(self, name)
            check(lo <= hi, name, "lo <= hi")
        for name in ("pre_open_delay", "full_open_delay"):
            mean, std = getattr(self, name)
            check(mean >= 0 and std >= 0, name, "(mean >= 0, std >= 0)")
        check(self.mass_range[0] > 0, "mass_range", "mass > 0")
        check(self.side_range[0] > 0, "side_range", "side > 0")
        check(0 <= self.com_fraction <= 0.25, "com_fraction", "[0, 0.25]")
        check(self.release_bounds[0] >= 0 and self.release_bounds[1] <= 1, "release_bounds", "within [0, 1]")
        check(self.speed_bounds[0] > 0, "speed_bounds", "speed > 0")
        check(self.reach_bounds[0] > 0 and self.reach_bounds[1] <= 1, "reach_bounds", "within (0, 1]")
        check(self.rim_height >= 0, "rim_height", ">= 0")
        check(min(self.bin_half_extent) > 0, "bin_half_extent", "> 0")
        check(self.stroke > 0, "stroke", "> 0")
        check(self.release_clearance is None or self.release_clearance >= 0, "release_clearance", ">= 0 or null")

    def replace(self, **changes) -> "EnvConfig":
        return dataclasses.replace(self, **changes)

    def ideal(self) -> "EnvConfig":
        """The same workspace with instantaneous gripper and no release noise."""
        return self.replace(pre_open_delay=(0.0, 0.0), full_open_delay=(0.0, 0.0),
                            noise=NoiseSpec(0.0, 0.0))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise InvalidInputError(f"EnvConfig: unknown fields {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def action_bounds(self) -> np.ndarray:
        return np.array([self.release_bounds, self.speed_bounds, self.height_bounds, self.reach_bounds])

    @property
    def context_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        po, ps = np.array(self.pick_window_origin), np.array(self.pick_window_size)
        bo, bs = np.array(self.bin_area_origin), np.array(self.bin_area_size)
        return np.concatenate([po, bo]), np.concatenate([po + ps, bo + bs])


def _truncated_normal(rng: np.random.Generator, mean: float, std: float) -> float:
    while True:
        x = rng.normal(mean, std)
        if x >= 0:
            return float(x)


def sample_scene(config: EnvConfig, rng: np.random.Generator) -> tuple[Context, Scene]:
    """Draw one randomised (context, scene) pair."""
    bo, bs = config.bin_area_origin, config.bin_area_size
    po, ps = config.pick_window_origin, config.pick_window_size
    bin_xy = np.array([rng.uniform(bo[0], bo[0] + bs[0]), rng.uniform(bo[1], bo[1] + bs[1])])
    obj_xy = np.array([rng.uniform(po[0], po[0] + ps[0]), rng.uniform(po[1], po[1] + ps[1])])
    d1 = _truncated_normal(rng, *config.pre_open_delay)
    d2 = _truncated_normal(rng, *config.full_open_delay)
    mass = rng.uniform(*config.mass_range)
    side = rng.uniform(*config.side_range)
    reach = config.com_fraction * side
    com = rng.uniform(-reach, reach, size=2)
    scene = Scene(
        object=ObjectSpec(mass, side, com),
        gripper=GripperSpec(d1, d2, config.stroke, config.release_clearance),
        bin=BinSpec(bin_xy, config.rim_height, *config.bin_half_extent),
    )
    return Context(obj_xy, bin_xy), scene


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(episode)])


@dataclass(frozen=True)
class EpisodeBatch:
    """Contexts, hidden scenes and release-noise draws for a block of episodes."""

    seed: int
    episodes: np.ndarray
    context: Context
    scene: Scene
    draws: np.ndarray

    def __len__(self):
        return len(self.episodes)

    def take(self, idx) -> "EpisodeBatch":
        """Sub-batch selected by a slice or index array."""
        return EpisodeBatch(self.seed, self.episodes[idx], self.context[idx], self.scene.take(idx),
                            self.draws[idx])


def sample_episodes(config: EnvConfig, seed: int, episodes) -> EpisodeBatch:
    episodes = np.asarray(episodes, dtype=np.int64)
    contexts, scenes, draws = [], [], []
    for i in episodes:
        rng = episode_rng(seed, i)
        c, s = sample_scene(config, rng)
        contexts.append(c.as_array())
        scenes.append(s)
        draws.append(physics.release_noise_draws(rng))
    return EpisodeBatch(
        seed=int(seed),
        episodes=episodes,
        context=Context.from_array(np.array(contexts).reshape(-1, 4)),
        scene=Scene.stack(scenes),
        draws=np.array(draws).reshape(-1, 3),
    )


def decode_action(raw, context: Context | None = None, config: EnvConfig | None = None) -> ThrowCommand:
    """Affine map of a raw action in [-1, 1]^4 onto the command bounds.

    Components are clamped to [-1, 1] first, so any finite input is safe.
    ``context`` is accepted for interface symmetry; the geometry it implies is
    resolved later by :func:`throwsim.physics.throw_points`.
    """
    config = EnvConfig() if config is None else config
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise InvalidInputError("decode_action: non-finite raw action")
    bounds = config.action_bounds
    x = np.clip(raw, -1.0, 1.0)
    values = bounds[:, 0] + 0.5 * (x + 1.0) * (bounds[:, 1] - bounds[:, 0])
    values = np.clip(values, bounds[:, 0], bounds[:, 1])
    return ThrowCommand.from_array(values)


def encode_action(command: ThrowCommand, config: EnvConfig | None = None) -> np.ndarray:
    """Inverse of :func:`decode_action` (degenerate bounds map to 0)."""
    config = EnvConfig() if config is None else config
    bounds = config.action_bounds
    width = bounds[:, 1] - bounds[:, 0]
    safe = np.where(width > 0, width, 1.0)
    raw = np.where(width > 0, 2.0 * (command.as_array() - bounds[:, 0]) / safe - 1.0, 0.0)
    return np.clip(raw, -1.0, 1.0)


class BaselineLike(Protocol):
    def predict(self, context) -> np.ndarray: ...


def compute_reward(outcome: ThrowOutcome, context: Context, baseline: BaselineLike) -> np.ndarray:
    """Predicted PaP time minus action time on success, minus action time otherwise (s)."""
    if baseline is None:
        raise ConfigurationError("compute_reward needs a fitted baseline predictor")
    b = baseline.predict(context)
    t = np.asarray(outcome.action_time)
    return np.where(outcome.success, b - t, -t)


def step(context: Context, scene: Scene, raw_action, robot: RobotSpec, baseline: BaselineLike,
         rng: np.random.Generator, config: EnvConfig | None = None):
    """One bandit interaction: decode, simulate, reward.  Inputs are not mutated."""
    config = EnvConfig() if config is None else config
    command = decode_action(raw_action, context, config)
    outcome = physics.simulate_throw(context, command, scene, robot, rng, config.noise)
    return compute_reward(outcome, context, baseline), outcome


def simulate_episodes(batch: EpisodeBatch, command: ThrowCommand, robot: RobotSpec,
                      config: EnvConfig) -> ThrowOutcome:
    return physics.simulate_batch(batch.context, command, batch.scene, robot, config.noise, batch.draws)


def policy_commands(policy, context: Context, config: EnvConfig, robot: RobotSpec,
                    deterministic: bool = True, rng: np.random.Generator | None = None) -> ThrowCommand:
    """Commands of any policy for a batch of contexts.

    Scripted policies expose ``commands`` and build commands directly; learned
    policies expose ``act`` and return raw actions that are decoded here.
    """
    if hasattr(policy, "commands"):
        return policy.commands(context, config, robot)
    raw = policy.act(context.as_array(), deterministic=deterministic, rng=rng)
    return decode_action(raw, context, config)


@dataclass(frozen=True)
class EpisodeRecord:
    seed: int
    episode: int
    context: Context
    command: ThrowCommand
    outcome: ThrowOutcome
    reward: float

    def row(self) -> list:
        c = self.context.as_array()
        a = self.command.as_array()
        o = self.outcome
        return [
            self.seed, self.episode, *map(float, c), *map(float, a), int(bool(o.success)),
            float(o.action_time), *map(float, o.landing), float(self.reward),
        ]


ROLLOUT_BLOCK = 1024


def run_episodes(policy, n: int, config: EnvConfig, seed: int, robot: RobotSpec | None = None,
                 baseline: BaselineLike | None = None, deterministic: bool = True,
                 block: int = ROLLOUT_BLOCK) -> Iterator[EpisodeRecord]:
    """Yield ``n`` independent episodes of ``policy`` in order.

    Episodes are simulated in blocks; each block of stochastic actions uses
    its own generator keyed by the block index, so output is reproducible.
    """
    if n < 1:
        raise InvalidInputError("run_episodes: n must be >= 1")
    robot = RobotSpec() if robot is None else robot
    for start in range(0, n, block):
        idx = np.arange(start, min(n, start + block))
        batch = sample_episodes(config, seed, idx)
        rng = np.random.default_rng([int(seed), int(start // block), 1])
        command = policy_commands(policy, batch.context, config, robot, deterministic, rng)
        outcome = simulate_episodes(batch, command, robot, config)
        reward = compute_reward(outcome, batch.context, baseline)
        for j, i in enumerate(idx):
            yield EpisodeRecord(int(seed), int(i), batch.context[j], command[j], outcome[j], float(reward[j]))


def write_episodes_csv(records, path) -> int:
    """Write episode records; floats use ``repr`` so values round-trip exactly."""
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in rec.row()])
            count += 1
    return count


class ThrowEnv:
    """Batched training interface around the throwing bandit.

    Observations are contexts rescaled to [-1, 1]^4 from the configured
    pick-window and bin-area bounds.
    """

    obs_dim = 4
    action_dim = 4

    def __init__(self, config: EnvConfig, robot: RobotSpec, baseline: BaselineLike, seed: int = 0):
        self.config = config
        self.robot = robot
        self.baseline = baseline
        self.seed = int(seed)
        low, high = config.context_bounds
        self.obs_low, self.obs_high = low, high

    def sample(self, episodes, seed: int | None = None) -> EpisodeBatch:
        return sample_episodes(self.config, self.seed if seed is None else seed, episodes)

    def observe(self, batch: EpisodeBatch) -> np.ndarray:
        return batch.context.as_array()

    def evaluate(self, batch: EpisodeBatch, raw_actions) -> tuple[np.ndarray, np.ndarray]:
        command = decode_action(raw_actions, batch.context, self.config)
        outcome = simulate_episodes(batch, command, self.robot, self.config)
        return compute_reward(outcome, batch.context, self.baseline), np.asarray(outcome.success)
