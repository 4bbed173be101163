"""Linear point-to-point moves of the delta robot.

Every move is a symmetric accelerate / cruise / decelerate profile along the
straight line joining two Cartesian points.  All functions broadcast over a
leading batch dimension: a ``start`` of shape ``(n, 3)`` yields a profile whose
timing fields have shape ``(n,)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class RobotSpec:
    """Kinematic limits of the robot.

    Attributes
    ----------
    max_speed:
        Cartesian speed limit (m/s).
    max_accel:
        Acceleration used for every accelerating and decelerating phase (m/s^2).
    pick_height:
        Gripper height above the conveyor when grasping (m).
    place_height:
        Gripper height above the bin rim when placing (m).
    pap_overhead:
        Fixed time added to every Pick-and-Place move (s).
    """

    max_speed: float = 10.0
    max_accel: float = 100.0
    pick_height: float = 0.05
    place_height: float = 0.05
    pap_overhead: float = 0.0

    def __post_init__(self):
        for name in ("max_speed", "max_accel"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"RobotSpec.{name} must be > 0, got {value!r}")
        for name in ("pick_height", "place_height", "pap_overhead"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise InvalidInputError(f"RobotSpec.{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class MotionProfile:
    """Timing of a symmetric trapezoidal (or triangular) linear move."""

    start: np.ndarray
    end: np.ndarray
    peak_speed: np.ndarray
    t_accel: np.ndarray
    t_cruise: np.ndarray
    t_decel: np.ndarray

    @property
    def distance(self) -> np.ndarray:
        return np.linalg.norm(self.end - self.start, axis=-1)

    @property
    def accel(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.t_accel > 0, self.peak_speed / np.where(self.t_accel > 0, self.t_accel, 1.0), 0.0)

    @property
    def direction(self) -> np.ndarray:
        d = self.distance[..., None]
        delta = self.end - self.start
        return np.where(d > 0, delta / np.where(d > 0, d, 1.0), 0.0)

    @property
    def triangular(self) -> np.ndarray:
        return self.t_cruise == 0

    @property
    def duration(self) -> np.ndarray:
        return self.t_accel + self.t_cruise + self.t_decel


def plan_linear_move(start, end, speed_cap, robot: RobotSpec) -> MotionProfile:
    """Time-minimal symmetric profile from ``start`` to ``end``.

    The peak speed is ``min(speed_cap, sqrt(a * d))``: a triangle when the cap
    is never reached, otherwise a trapezoid cruising at the cap.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    speed_cap = np.asarray(speed_cap, dtype=float)
    if not (np.all(np.isfinite(start)) and np.all(np.isfinite(end)) and np.all(np.isfinite(speed_cap))):
        raise InvalidInputError("plan_linear_move: non-finite input")
    if start.shape[-1:] != (3,) or end.shape[-1:] != (3,):
        raise InvalidInputError("plan_linear_move: start and end must be 3-vectors")
    if np.any(speed_cap <= 0) or np.any(speed_cap > robot.max_speed):
        raise InvalidInputError(
            f"plan_linear_move: speed_cap must lie in (0, {robot.max_speed}]"
        )
    start, end = np.broadcast_arrays(start, end)
    a = robot.max_accel
    d = np.linalg.norm(end - start, axis=-1)
    speed_cap = np.broadcast_to(speed_cap, d.shape)

    v_tri = np.sqrt(a * d)
    tri = v_tri < speed_cap
    peak = np.where(tri, v_tri, speed_cap)
    t_ramp = peak / a
    t_cruise = np.where(tri, 0.0, (d - speed_cap**2 / a) / speed_cap)
    return MotionProfile(
        start=start.copy(),
        end=end.copy(),
        peak_speed=peak,
        t_accel=t_ramp,
        t_cruise=np.maximum(t_cruise, 0.0),
        t_decel=t_ramp.copy(),
    )


def move_time(profile: MotionProfile) -> np.ndarray:
    return profile.duration


def distance_at(profile: MotionProfile, t) -> tuple[np.ndarray, np.ndarray]:
    """Arc length travelled and scalar speed at time ``t`` (clamped to the move)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInputError("state_at: t must be >= 0")
    a = profile.accel
    v = profile.peak_speed
    ta, tc, td = profile.t_accel, profile.t_cruise, profile.t_decel
    total = ta + tc + td
    d_acc = 0.5 * a * ta**2

    t1 = np.minimum(t, ta)
    s = 0.5 * a * t1**2
    speed = a * t1
    cruising = (t > ta) & (t <= ta + tc)
    t2 = np.clip(t - ta, 0.0, tc)
    s = np.where(t > ta, d_acc + v * t2, s)
    speed = np.where(cruising, v, speed)
    t3 = np.clip(t - ta - tc, 0.0, td)
    decel = t > ta + tc
    s = np.where(decel, d_acc + v * tc + v * t3 - 0.5 * a * t3**2, s)
    speed = np.where(decel, v - a * t3, speed)
    done = t >= total
    s = np.where(done, profile.distance, s)
    speed = np.where(done, 0.0, speed)
    return s, speed


def state_at(profile: MotionProfile, t) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity of the tool at time ``t`` after the move starts.

    After the move has finished the tool rests at ``end`` with zero velocity.
    """
    s, speed = distance_at(profile, t)
    u = profile.direction
    position = profile.start + s[..., None] * u
    done = (np.asarray(t) >= profile.duration)[..., None]
    position = np.where(done, profile.end, position)
    return position, speed[..., None] * u


def time_at_distance(profile: MotionProfile, s) -> np.ndarray:
    """Inverse of :func:`distance_at`: when the tool has travelled ``s`` metres."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, profile.distance)
    a = profile.accel
    v = profile.peak_speed
    ta, tc = profile.t_accel, profile.t_cruise
    total = profile.duration
    d_acc = 0.5 * a * ta**2
    d_cruise = v * tc
    with np.errstate(invalid="ignore", divide="ignore"):
        safe_a = np.where(a > 0, a, 1.0)
        safe_v = np.where(v > 0, v, 1.0)
        t_acc = np.sqrt(2.0 * s / safe_a)
        t_cru = ta + (s - d_acc) / safe_v
        remaining = np.maximum(profile.distance - s, 0.0)
        t_dec = total - np.sqrt(2.0 * remaining / safe_a)
    t = np.where(s <= d_acc, t_acc, np.where(s <= d_acc + d_cruise, t_cru, t_dec))
    return np.where(profile.distance > 0, t, 0.0)


def pick_point(object_xy, robot: RobotSpec) -> np.ndarray:
    object_xy = np.asarray(object_xy, dtype=float)
    z = np.full(object_xy.shape[:-1] + (1,), robot.pick_height)
    return np.concatenate([object_xy, z], axis=-1)


def place_point(bin_xy, rim_height: float, robot: RobotSpec) -> np.ndarray:
    bin_xy = np.asarray(bin_xy, dtype=float)
    z = np.full(bin_xy.shape[:-1] + (1,), rim_height + robot.place_height)
    return np.concatenate([bin_xy, z], axis=-1)


def pap_time(context, robot: RobotSpec, rim_height: float = 0.10) -> np.ndarray:
    """Duration of the Pick-and-Place move for ``context``.

    A single linear move at full speed from the pick point above the object to
    the place point above the bin centre, plus the robot's fixed overhead.
    ``context`` is a :class:`~throwsim.env.Context` or an ``(..., 4)`` array
    laid out as ``(x_o, y_o, x_b, y_b)``.
    """
    c = context.as_array() if hasattr(context, "as_array") else np.asarray(context, dtype=float)
    profile = plan_linear_move(
        pick_point(c[..., 0:2], robot), place_point(c[..., 2:4], rim_height, robot), robot.max_speed, robot
    )
    return move_time(profile) + robot.pap_overhead
