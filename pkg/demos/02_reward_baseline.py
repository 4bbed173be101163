"""Fit the placing-time estimator that the reward is measured against.

A successful throw earns (estimated placing time - its own time); a miss
earns minus its time.  Placing itself should therefore score about zero.

Run: python3 demos/02_reward_baseline.py
"""
from throwsim.agents import PapPolicy
from throwsim.baseline import FitOptions, fit, generate_dataset
from throwsim.env import EnvConfig
from throwsim.evaluation import evaluate
from throwsim.motion import RobotSpec

config, robot = EnvConfig(), RobotSpec()
data = generate_dataset(11_000, config, robot, seed=0)
predictor = fit(data, options=FitOptions(epochs=20))
print(f"mean placing time {1e3 * data.times.mean():.0f} ms, "
      f"held-out error {1e3 * predictor.report.validation_mae:.2f} ms")

m = evaluate(PapPolicy(), 2000, config, seed=1, robot=robot, baseline=predictor)
print(f"placing policy: reward {1e3 * m.mean_reward:+.2f} ms, success {100 * m.success_rate:.1f} %")
