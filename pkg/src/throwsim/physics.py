"""Gripper release, ballistic flight and the bin hit test.

Like :mod:`throwsim.motion`, everything here broadcasts over a leading batch
dimension so whole batches of episodes can be simulated in one call.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import motion
from .errors import DegenerateThrowError, InvalidInputError

if TYPE_CHECKING:
    from .env import Context, Scene, ThrowCommand

GRAVITY = 9.81


def _vec(x, n=None):
    a = np.asarray(x, dtype=float)
    if n is not None and a.shape[-1:] != (n,):
        raise InvalidInputError(f"expected a {n}-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class GripperSpec:
    """Parallel gripper timing.

    ``pre_open_delay`` elapses between the open signal and the jaws starting to
    move; the jaws then open linearly over ``full_open_delay`` to ``stroke``.

    With ``release_clearance`` unset the jaw gap is measured from fully
    closed and the object separates once the gap exceeds its side.  With a
    clearance set, the jaws start clamped on the object and it separates once
    they have opened by that clearance.
    """

    pre_open_delay: float = 0.010
    full_open_delay: float = 0.171
    stroke: float = 0.040
    release_clearance: float | None = None

    def __post_init__(self):
        for name in ("pre_open_delay", "full_open_delay", "stroke"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise InvalidInputError(f"GripperSpec.{name} must be >= 0")
        if self.release_clearance is not None and np.any(np.asarray(self.release_clearance) < 0):
            raise InvalidInputError("GripperSpec.release_clearance must be >= 0")


@dataclass(frozen=True)
class ObjectSpec:
    mass: float
    side: float
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "com_offset", _vec(self.com_offset, 2))
        side = np.asarray(self.side)
        if np.any(np.asarray(self.mass) <= 0) or np.any(side <= 0):
            raise InvalidInputError("ObjectSpec: mass and side must be > 0")
        if np.any(np.abs(self.com_offset) > side[..., None] / 4 + 1e-12):
            raise InvalidInputError("ObjectSpec: |com_offset| components must be <= side/4")

    @property
    def offset_scale(self) -> np.ndarray:
        """Offset magnitude relative to side/4, in [0, sqrt(2)]."""
        return np.linalg.norm(self.com_offset, axis=-1) / (np.asarray(self.side) / 4)


@dataclass(frozen=True)
class BinSpec:
    center: np.ndarray
    rim_height: float = 0.10
    half_extent_x: float = 0.10
    half_extent_y: float = 0.10

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, 2))
        if np.any(np.asarray(self.half_extent_x) <= 0) or np.any(np.asarray(self.half_extent_y) <= 0):
            raise InvalidInputError("BinSpec: half extents must be > 0")
        if np.any(np.asarray(self.rim_height) < 0):
            raise InvalidInputError("BinSpec: rim_height must be >= 0")

    def contains(self, xy) -> np.ndarray:
        """Whether ``xy`` lies inside the opening rectangle (boundary included)."""
        d = np.abs(_vec(xy, 2) - self.center)
        return (d[..., 0] <= self.half_extent_x) & (d[..., 1] <= self.half_extent_y)

    def past_far_wall(self, xy, direction) -> np.ndarray:
        """Whether ``xy`` lies beyond the wall the object travels towards.

        ``direction`` is the horizontal unit vector of the throw.  The far wall
        sits at the rectangle's support distance along that direction.
        """
        u = _vec(direction, 2)
        support = self.half_extent_x * np.abs(u[..., 0]) + self.half_extent_y * np.abs(u[..., 1])
        along = np.sum((_vec(xy, 2) - self.center) * u, axis=-1)
        return along > support


@dataclass(frozen=True)
class NoiseSpec:
    """Release perturbation magnitudes for an object with maximal COM offset.

    ``speed_sigma`` is relative (fraction of speed), ``angle_sigma_deg`` is in
    degrees.  Both scale linearly with the object's COM offset.
    """

    speed_sigma: float = 0.05
    angle_sigma_deg: float = 3.0

    def __post_init__(self):
        if self.speed_sigma < 0 or self.angle_sigma_deg < 0:
            raise InvalidInputError("NoiseSpec: sigmas must be >= 0")

    @property
    def enabled(self) -> bool:
        return self.speed_sigma > 0 or self.angle_sigma_deg > 0


@dataclass(frozen=True)
class ThrowOutcome:
    """Result of one simulated throw (fields may be batched).

    ``action_time`` is the robot's motion duration.  ``release_lag`` is how
    long the robot waited, stopped, before the object separated (zero for
    throws that separate mid-motion).
    """

    success: np.ndarray
    landing: np.ndarray
    action_time: np.ndarray
    release_point: np.ndarray
    release_velocity: np.ndarray
    separation_time: np.ndarray
    flight_time: np.ndarray
    release_lag: np.ndarray
    target_point: np.ndarray

    def __len__(self):
        return int(np.size(self.action_time))

    def __getitem__(self, i) -> "ThrowOutcome":
        return ThrowOutcome(**{k: np.asarray(getattr(self, k))[i] for k in self.__dataclass_fields__})


def separation_delay(obj: ObjectSpec, gripper: GripperSpec) -> np.ndarray:
    """Time from the open signal until the jaws clear the object."""
    opening = obj.side if gripper.release_clearance is None else gripper.release_clearance
    fraction = np.minimum(1.0, np.asarray(opening) / np.asarray(gripper.stroke))
    return np.asarray(gripper.pre_open_delay) + np.asarray(gripper.full_open_delay) * fraction


def flight_time(z0, vz, floor_z) -> np.ndarray:
    """Non-negative time at which a projectile descends through ``floor_z``.

    NaN where no such time exists.
    """
    z0, vz, floor_z = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (z0, vz, floor_z)))
    h = z0 - floor_z
    disc = vz**2 + 2.0 * GRAVITY * h
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(disc)
        # two algebraically equal forms; pick the one without cancellation
        t_up = (vz + root) / GRAVITY
        t_down = 2.0 * h / (root - vz)
        t = np.where(vz >= 0, t_up, np.where(root - vz > 0, t_down, 0.0))
    bad = (disc < 0) | (t < 0) | ~np.isfinite(t)
    return np.where(bad, np.nan, t)


def ballistic_land(release_point, release_velocity, floor_z) -> tuple[np.ndarray, np.ndarray]:
    """Landing xy and flight time of a drag-free projectile.

    Raises
    ------
    DegenerateThrowError
        If the object never comes down through ``floor_z``.
    """
    p = _vec(release_point, 3)
    v = _vec(release_velocity, 3)
    t = flight_time(p[..., 2], v[..., 2], floor_z)
    if np.any(np.isnan(t)):
        raise DegenerateThrowError("object never descends through the landing plane")
    landing = p[..., :2] + v[..., :2] * t[..., None]
    return landing, t


def release_noise_draws(rng: np.random.Generator, size=None) -> np.ndarray:
    """Standard variates consumed by :func:`perturb_release`.

    Columns: speed normal, angle normal, axis azimuth in [0, 2*pi).  Always
    drawn, even when noise is disabled, so random streams stay aligned.
    """
    shape = (3,) if size is None else (size, 3)
    z = rng.standard_normal(shape[:-1] + (2,))
    phi = rng.uniform(0.0, 2.0 * np.pi, shape[:-1] + (1,))
    return np.concatenate([z, phi], axis=-1)


def apply_release_noise(velocity, offset_scale, noise: NoiseSpec, draws) -> np.ndarray:
    v = _vec(velocity, 3)
    if not noise.enabled:
        return v.copy()
    k = np.asarray(offset_scale, dtype=float)[..., None]
    draws = np.asarray(draws, dtype=float)
    factor = 1.0 + noise.speed_sigma * k * draws[..., 0:1]
    theta = np.deg2rad(noise.angle_sigma_deg) * k * draws[..., 1:2]
    phi = draws[..., 2:3]
    axis = np.concatenate([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=-1)
    # Rodrigues rotation about a horizontal axis
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    rotated = (
        v * cos_t
        + np.cross(axis, v) * sin_t
        + axis * np.sum(axis * v, axis=-1, keepdims=True) * (1.0 - cos_t)
    )
    return factor * rotated


def perturb_release(velocity, obj: ObjectSpec, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Release velocity after jaw friction, modelled as COM-scaled noise."""
    v = _vec(velocity, 3)
    draws = release_noise_draws(rng, None if v.ndim == 1 else v.shape[0])
    return apply_release_noise(v, obj.offset_scale, noise, draws)


def throw_points(context: "Context", command: "ThrowCommand", rim_height, robot: motion.RobotSpec):
    """Pick, target and release points of a command (batched)."""
    pick_xy = np.asarray(context.object_xy, dtype=float)
    bin_xy = np.asarray(context.bin_xy, dtype=float)
    reach = np.asarray(command.target_reach, dtype=float)[..., None]
    target_xy = pick_xy + reach * (bin_xy - pick_xy)
    target_z = np.asarray(rim_height + np.asarray(command.target_height), dtype=float)[..., None]
    pick = motion.pick_point(pick_xy, robot)
    target = np.concatenate([target_xy, np.broadcast_to(target_z, target_xy.shape[:-1] + (1,))], axis=-1)
    frac = np.asarray(command.release_fraction, dtype=float)[..., None]
    release = pick + frac * (target - pick)
    return pick, target, release


def simulate_batch(
    context: "Context",
    command: "ThrowCommand",
    scene: "Scene",
    robot: motion.RobotSpec,
    noise: NoiseSpec,
    draws,
) -> ThrowOutcome:
    """Vectorised throw simulation with pre-drawn release noise.

    Degenerate flights count as failures landing at the release xy.
    """
    pick, target, _ = throw_points(context, command, scene.bin.rim_height, robot)
    profile = motion.plan_linear_move(pick, target, command.speed, robot)
    frac = np.asarray(command.release_fraction, dtype=float)
    t_release = motion.time_at_distance(profile, frac * profile.distance)
    t_sep = t_release + separation_delay(scene.object, scene.gripper)
    position, velocity = motion.state_at(profile, t_sep)
    velocity = apply_release_noise(velocity, scene.object.offset_scale, noise, draws)
    t_flight = flight_time(position[..., 2], velocity[..., 2], scene.bin.rim_height)
    degenerate = np.isnan(t_flight)
    t_safe = np.where(degenerate, 0.0, t_flight)
    landing = position[..., :2] + velocity[..., :2] * t_safe[..., None]

    throw_dir = np.asarray(context.bin_xy, dtype=float) - pick[..., :2]
    norm = np.linalg.norm(throw_dir, axis=-1, keepdims=True)
    throw_dir = np.where(norm > 0, throw_dir / np.where(norm > 0, norm, 1.0), 0.0)
    success = (
        ~degenerate
        & scene.bin.contains(landing)
        & ~scene.bin.past_far_wall(position[..., :2], throw_dir)
    )
    duration = motion.move_time(profile)
    return ThrowOutcome(
        success=success,
        landing=landing,
        action_time=duration,
        release_point=position,
        release_velocity=velocity,
        separation_time=t_sep,
        flight_time=t_flight,
        release_lag=np.maximum(t_sep - duration, 0.0),
        target_point=target,
    )


def simulate_throw(
    context: "Context",
    command: "ThrowCommand",
    scene: "Scene",
    robot: motion.RobotSpec,
    rng: np.random.Generator,
    noise: NoiseSpec | None = None,
) -> ThrowOutcome:
    """Simulate a single throw: move, open, separate, fly, land.

    The robot moves from the pick point to the command's target.  The open
    signal is issued when it passes the release point; the object separates
    one separation delay later, wherever the robot then is, and flies
    ballistically down to the rim plane.
    """
    noise = NoiseSpec() if noise is None else noise
    draws = release_noise_draws(rng)
    return simulate_batch(context, command, scene, robot, noise, draws)
