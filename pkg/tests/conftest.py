import numpy as np
import pytest

from throwsim.env import EnvConfig
from throwsim.motion import RobotSpec, pap_time


class ExactBaseline:
    """Reward baseline that returns the true PaP time (no fitting error)."""

    def __init__(self, robot=None, rim_height=0.10):
        self.robot = RobotSpec() if robot is None else robot
        self.rim_height = rim_height

    def predict(self, context):
        c = context.as_array() if hasattr(context, "as_array") else np.asarray(context, dtype=float)
        return pap_time(c, self.robot, self.rim_height)


@pytest.fixture(scope="session")
def config():
    return EnvConfig()


@pytest.fixture(scope="session")
def robot():
    return RobotSpec()


@pytest.fixture(scope="session")
def exact_baseline():
    return ExactBaseline()
