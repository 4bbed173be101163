"""Place one object, then find the fastest throw that lands it, and compare timings.

Run: python3 demos/01_one_throw.py
"""
import numpy as np

from throwsim.agents import pap_policy
from throwsim.env import Context, EnvConfig, Scene, ThrowCommand
from throwsim.motion import RobotSpec
from throwsim.physics import BinSpec, GripperSpec, ObjectSpec, simulate_throw

config, robot = EnvConfig(), RobotSpec()
ctx = Context(np.array([0.05, 0.0]), np.array([0.10, 0.80]))
gripper = GripperSpec(0.010, 0.171, config.stroke, config.release_clearance)
scene = Scene(ObjectSpec(0.03, 0.04), gripper, BinSpec(ctx.bin_xy, config.rim_height, *config.bin_half_extent))
rng = np.random.default_rng(0)

place = simulate_throw(ctx, pap_policy(ctx, robot, config=config), scene, robot, rng, config.noise)
print(f"place: motion {1e3 * float(place.action_time):.0f} ms, gripper lag {1e3 * float(place.release_lag):.0f} ms, "
      f"success {bool(place.success)}")

# brute-force the fastest command that still lands in the bin (noise off for this scene)
quiet = type(config.noise)(0.0, 0.0)
best = None
for s in np.linspace(0.0, 1.0, 11):
    for v in np.linspace(1.0, 10.0, 10):
        for z in np.linspace(0.02, 0.5, 5):
            for u in np.linspace(0.1, 1.0, 10):
                cmd = ThrowCommand(np.array(s), np.array(v), np.array(z), np.array(u))
                out = simulate_throw(ctx, cmd, scene, robot, rng, quiet)
                if bool(out.success) and (best is None or float(out.action_time) < float(best[1].action_time)):
                    best = (cmd, out)
cmd, out = best
print(f"throw: motion {1e3 * float(out.action_time):.0f} ms, reach {100 * float(cmd.target_reach):.0f} % of the way, "
      f"release at {100 * float(cmd.release_fraction):.0f} % of the move, {float(cmd.speed):.0f} m/s, "
      f"lands {100 * np.linalg.norm(out.landing - ctx.bin_xy):.1f} cm from the bin centre")
