"""Train a short PPO run on the throwing task and compare it with the scripted policies.

The full-length run uses 500 000 episodes; this one uses 200 000 and takes
about a minute.

Run: python3 demos/03_train_and_compare.py
"""
from throwsim.agents import HassanPolicy, PapPolicy, preset, train
from throwsim.baseline import FitOptions, fit, generate_dataset
from throwsim.env import EnvConfig, ThrowEnv
from throwsim.evaluation import compare
from throwsim.motion import RobotSpec

config, robot = EnvConfig(), RobotSpec()
predictor = fit(generate_dataset(11_000, config, robot, seed=0), options=FitOptions(epochs=20))

result = train("ppo", ThrowEnv(config, robot, predictor, seed=0), preset("ppo", "sb3"), 200_000, seed=0,
               eval_every=40_000)
for episode, reward, success in result.curve.rows():
    print(f"episode {episode:>6}: eval reward {1e3 * reward:+6.1f} ms, success {100 * success:5.1f} %")

table = compare([PapPolicy(), HassanPolicy(), result.policy], 200, config, seed=7, robot=robot,
                baseline=predictor, labels=["pap", "hassan", "ppo"])
print(table.render())
