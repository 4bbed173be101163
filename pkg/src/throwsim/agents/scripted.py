"""Hand-written policies: Pick-and-Place and a delay-unaware ballistic planner."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..env import Context, EnvConfig, Scene, ThrowCommand, encode_action
from ..errors import InfeasibleThrowError
from ..motion import RobotSpec
from ..physics import GRAVITY, BinSpec

PENALTY = 1e6
"""Weight (s/m^2) on the squared landing error in the planner's objective."""
FEASIBLE_TOL = 0.01
GRID_TOL = 0.05
N_SEEDS = 2
GRID = (12, 12, 12, 6)
"""Grid points over (release fraction, speed, reach, target height)."""


def pap_policy(context: Context, robot: RobotSpec, scene: Scene | None = None,
               config: EnvConfig | None = None) -> ThrowCommand:
    """Carry the object to above the bin centre at full speed and release there.

    The release signal is given on arrival, so the object always separates
    from a stationary gripper.  ``scene`` is accepted for symmetry; the
    command does not depend on it.
    """
    config = EnvConfig() if config is None else config
    n = np.shape(context.object_xy)[:-1]
    lo, hi = config.height_bounds
    return ThrowCommand(
        release_fraction=np.ones(n),
        speed=np.full(n, robot.max_speed),
        target_height=np.full(n, min(max(robot.place_height, lo), hi)),
        target_reach=np.ones(n),
    )


@dataclass
class PapPolicy:
    tag: str = "pap"
    deterministic: bool = True

    def commands(self, context: Context, config: EnvConfig, robot: RobotSpec) -> ThrowCommand:
        return pap_policy(context, robot, config=config)

    def act(self, obs, deterministic: bool = True, rng=None, config: EnvConfig | None = None,
            robot: RobotSpec | None = None) -> np.ndarray:
        config = EnvConfig() if config is None else config
        robot = RobotSpec() if robot is None else robot
        return encode_action(self.commands(Context.from_array(obs), config, robot), config)


# ideal ballistic planner -------------------------------------------------------


def _ideal_grid(x, pick, bin_xy, rim, robot):
    """Vectorised ideal-model landing and move time for commands ``x`` (n, 4)."""
    s_r, v, z_t, u_t = x.T
    target = np.column_stack([pick[0] + u_t * (bin_xy[0] - pick[0]), pick[1] + u_t * (bin_xy[1] - pick[1]),
                              np.full(len(x), rim) + z_t])
    delta = target - pick
    d = np.linalg.norm(delta, axis=1)
    direction = delta / d[:, None]
    a = robot.max_accel
    peak = np.minimum(v, np.sqrt(a * d))
    d_ramp = 0.5 * peak**2 / a
    duration = 2.0 * peak / a + (d - 2.0 * d_ramp) / peak
    s = s_r * d
    speed = np.where(s <= d_ramp, np.sqrt(2.0 * a * s),
                     np.where(s <= d - d_ramp, peak, np.sqrt(2.0 * a * np.maximum(d - s, 0.0))))
    pos = pick + s[:, None] * direction
    vel = speed[:, None] * direction
    h = pos[:, 2] - rim
    vz = vel[:, 2]
    disc = vz * vz + 2.0 * GRAVITY * h
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(disc)
        t = np.where(vz >= 0, (vz + root) / GRAVITY, 2.0 * h / (root - vz))
    ok = (disc >= 0) & np.isfinite(t) & (t >= 0)
    landing = pos[:, :2] + vel[:, :2] * np.where(ok, t, 0.0)[:, None]
    return landing, duration, ok


def _ideal_one(x, pick, bin_xy, rim, a):
    """Scalar twin of :func:`_ideal_grid`, fast enough for the simplex search."""
    s_r, v, z_t, u_t = x
    tx = pick[0] + u_t * (bin_xy[0] - pick[0])
    ty = pick[1] + u_t * (bin_xy[1] - pick[1])
    dx, dy, dz = tx - pick[0], ty - pick[1], rim + z_t - pick[2]
    d = math.sqrt(dx * dx + dy * dy + dz * dz)
    peak = min(v, math.sqrt(a * d))
    d_ramp = 0.5 * peak * peak / a
    duration = 2.0 * peak / a + (d - 2.0 * d_ramp) / peak
    s = s_r * d
    if s <= d_ramp:
        speed = math.sqrt(2.0 * a * s)
    elif s <= d - d_ramp:
        speed = peak
    else:
        speed = math.sqrt(2.0 * a * max(d - s, 0.0))
    ux, uy, uz = dx / d, dy / d, dz / d
    h = pick[2] + s * uz - rim
    vz = speed * uz
    disc = vz * vz + 2.0 * GRAVITY * h
    if disc < 0:
        return None, duration
    root = math.sqrt(disc)
    if vz >= 0:
        t = (vz + root) / GRAVITY
    elif root - vz > 0:
        t = 2.0 * h / (root - vz)
    else:
        return None, duration
    if t < 0:
        return None, duration
    return (pick[0] + s * ux + speed * ux * t, pick[1] + s * uy + speed * uy * t), duration


def hassan_solve(context: Context, robot: RobotSpec, bin: BinSpec, config: EnvConfig | None = None) -> ThrowCommand:
    """Fastest command that lands on the bin centre under ideal release physics.

    The ideal model has no gripper delay and no release noise: the object
    leaves with the tool's velocity at the release point.  A coarse grid over
    the command box seeds a bounded Nelder-Mead search on
    ``move_time + PENALTY * |landing - centre|^2`` started from the fastest
    grid cells landing within 5 cm of the centre.

    Raises
    ------
    InfeasibleThrowError
        If the refined command misses the centre by more than 1 cm.
    """
    config = EnvConfig() if config is None else config
    pick = np.array([*np.asarray(context.object_xy, dtype=float), robot.pick_height])
    centre = np.asarray(bin.center, dtype=float)
    rim = float(bin.rim_height)
    bounds = config.action_bounds
    axes = [np.linspace(lo, hi, k) for (lo, hi), k in zip(bounds, GRID)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
    landing, duration, ok = _ideal_grid(grid, pick, centre, rim, robot)
    miss = np.where(ok, np.linalg.norm(landing - centre, axis=1), np.inf)
    # the grid is too coarse to land exactly; seed the search from the fastest
    # cells that land roughly on target
    seeds = np.flatnonzero(miss < GRID_TOL)
    if len(seeds) == 0:
        raise InfeasibleThrowError(f"no grid command lands within {GRID_TOL} m of {tuple(centre)}")
    seeds = seeds[np.argsort(duration[seeds], kind="stable")[:N_SEEDS]]

    pick_t, centre_t, a = tuple(pick), tuple(centre), robot.max_accel

    def objective(x):
        land, dur = _ideal_one(x, pick_t, centre_t, rim, a)
        if land is None:
            return dur + PENALTY
        ex, ey = land[0] - centre_t[0], land[1] - centre_t[1]
        return dur + PENALTY * (ex * ex + ey * ey)

    spacing = (bounds[:, 1] - bounds[:, 0]) / (np.array(GRID) - 1)
    best_x, best_f = None, np.inf
    for k in seeds:
        x0 = grid[k]
        step = np.where(x0 + 0.5 * spacing <= bounds[:, 1], 0.5 * spacing, -0.5 * spacing)
        simplex = np.vstack([x0, x0 + np.diag(step)])
        res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                       options={"initial_simplex": simplex, "xatol": 1e-7, "fatol": 1e-9, "maxfev": 1500})
        if res.fun < best_f:
            best_x, best_f = np.clip(res.x, bounds[:, 0], bounds[:, 1]), res.fun
    x = best_x
    land, _ = _ideal_one(x, pick_t, centre_t, rim, a)
    miss = np.inf if land is None else math.hypot(land[0] - centre_t[0], land[1] - centre_t[1])
    if miss > FEASIBLE_TOL:
        raise InfeasibleThrowError(f"best ideal command misses the bin centre by {miss:.3f} m")
    return ThrowCommand(*map(float, x))


def _solve_rows(contexts: np.ndarray, config: EnvConfig, robot: RobotSpec) -> tuple[np.ndarray, int]:
    rows, infeasible = [], 0
    half = config.bin_half_extent
    batch = Context.from_array(contexts.reshape(-1, 4))
    for i in range(len(batch)):
        c = batch[i]
        bin_spec = BinSpec(c.bin_xy, config.rim_height, half[0], half[1])
        try:
            rows.append(hassan_solve(c, robot, bin_spec, config).as_array())
        except InfeasibleThrowError:
            infeasible += 1
            rows.append(pap_policy(c, robot, config=config).as_array())
    return np.array(rows).reshape(-1, 4), infeasible


@dataclass
class HassanPolicy:
    """Ideal-physics planner applied per context.

    Contexts the planner cannot solve fall back to the Pick-and-Place command
    and are counted in ``infeasible``.  With ``jobs > 1`` contexts are solved
    in worker processes; results do not depend on the worker count.
    """

    tag: str = "hassan"
    deterministic: bool = True
    jobs: int = 1
    infeasible: int = field(default=0, compare=False)

    def commands(self, context: Context, config: EnvConfig, robot: RobotSpec) -> ThrowCommand:
        arr = context.as_array().reshape(-1, 4)
        if self.jobs <= 1 or len(arr) < 2 * self.jobs:
            rows, bad = _solve_rows(arr, config, robot)
        else:
            chunks = np.array_split(arr, self.jobs)
            with ProcessPoolExecutor(self.jobs) as pool:
                parts = list(pool.map(_solve_rows, chunks, [config] * len(chunks), [robot] * len(chunks)))
            rows = np.concatenate([p[0] for p in parts])
            bad = sum(p[1] for p in parts)
        self.infeasible += bad
        return ThrowCommand.from_array(rows)

    def act(self, obs, deterministic: bool = True, rng=None, config: EnvConfig | None = None,
            robot: RobotSpec | None = None) -> np.ndarray:
        config = EnvConfig() if config is None else config
        robot = RobotSpec() if robot is None else robot
        return encode_action(self.commands(Context.from_array(np.atleast_2d(obs)), config, robot), config)
