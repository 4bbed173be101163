
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import closed_form_time

from throwsim import motion
from throwsim.errors import InvalidInputError
from throwsim.motion import RobotSpec, move_time, pap_time, plan_linear_move, state_at

ROBOT = RobotSpec()


def move(d, v=10.0, robot=ROBOT):
    return plan_linear_move([0.0, 0.0, 0.0], [d, 0.0, 0.0], v, robot)


class TestPlanLinearMove:
    def test_triangular_example(self):
        p = move(0.5)
        assert bool(p.triangular)
        assert move_time(p) == pytest.approx(0.141421, abs=1e-6)

    def test_trapezoidal_example(self):
        p = move(2.0)
        assert not bool(p.triangular)
        assert move_time(p) == pytest.approx(0.3, abs=1e-12)

    def test_zero_distance(self):
        assert move_time(move(0.0)) == 0.0

    def test_speed_cap_out_of_range(self):
        with pytest.raises(InvalidInputError):
            move(1.0, v=10.5)
        with pytest.raises(InvalidInputError):
            move(1.0, v=0.0)

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            plan_linear_move([0, 0, np.nan], [1, 0, 0], 1.0, ROBOT)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        start, end = rng.uniform(-1, 1, (20, 3)), rng.uniform(-1, 1, (20, 3))
        caps = rng.uniform(0.5, 10, 20)
        batch = move_time(plan_linear_move(start, end, caps, ROBOT))
        single = [float(move_time(plan_linear_move(s, e, c, ROBOT))) for s, e, c in zip(start, end, caps)]
        np.testing.assert_array_equal(batch, single)

    @settings(max_examples=200, deadline=None)
    @given(d=st.floats(0.0, 3.0), v=st.floats(0.1, 10.0), a=st.floats(1.0, 500.0))
    def test_closed_form(self, d, v, a):
        robot = RobotSpec(max_speed=10.0, max_accel=a)
        p = move(d, v, robot)
        assert float(move_time(p)) == pytest.approx(closed_form_time(d, v, a), abs=1e-9)
        assert float(p.peak_speed) <= v + 1e-12
        assert float(p.t_cruise) >= 0
        assert float(p.distance) == pytest.approx(d, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(s=st.lists(st.floats(-1, 1), min_size=3, max_size=3), e=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
           v=st.floats(0.5, 10.0))
    def test_symmetry(self, s, e, v):
        fwd = move_time(plan_linear_move(s, e, v, ROBOT))
        back = move_time(plan_linear_move(e, s, v, ROBOT))
        assert float(fwd) == pytest.approx(float(back), abs=1e-12)

    def test_time_optimal_against_bang_bang(self):
        # Any admissible 1 kHz bang-bang schedule that stops at d takes at least the planned time.
        rng = np.random.default_rng(1)
        dt = 1e-3
        for _ in range(100):
            d, v, a = rng.uniform(0.01, 1.5), rng.uniform(0.5, 10), rng.uniform(20, 200)
            x = speed = t = 0.0
            while True:
                for acc in (a, 0.0, -a):
                    nv = min(max(speed + acc * dt, 0.0), v)
                    nx = x + 0.5 * (speed + nv) * dt
                    if nx + nv * nv / (2 * a) <= d + 1e-12 and (acc != 0.0 or nv >= a * dt):
                        break
                speed, x, t = nv, nx, t + dt
                if nv == 0.0 or d - x < 1e-9:
                    break
            assert x == pytest.approx(d, abs=1e-3)
            planned = float(move_time(move(d, v, RobotSpec(max_accel=a))))
            assert planned <= t + dt


class TestStateAt:
    def test_trapezoid_midway(self):
        pos, vel = state_at(move(2.0), 0.1)
        np.testing.assert_allclose(pos, [0.5, 0, 0], atol=1e-12)
        np.testing.assert_allclose(vel, [10, 0, 0], atol=1e-12)

    def test_initial_condition(self):
        pos, vel = state_at(move(0.7, 3.0), 0.0)
        np.testing.assert_array_equal(pos, [0, 0, 0])
        np.testing.assert_array_equal(vel, [0, 0, 0])

    def test_clamped_after_end(self):
        pos, vel = state_at(move(0.5), 1.0)
        np.testing.assert_array_equal(pos, [0.5, 0, 0])
        np.testing.assert_array_equal(vel, [0, 0, 0])

    def test_negative_time(self):
        with pytest.raises(InvalidInputError):
            state_at(move(1.0), -0.1)

    @pytest.mark.parametrize("d,v", [(0.3, 10.0), (1.2, 4.0), (2.0, 10.0)])
    def test_continuity(self, d, v):
        p = move(d, v)
        dt = 1e-3
        t = np.arange(0.0, float(move_time(p)) + 0.01, dt)
        pos, vel = state_at(p, t)
        speed = np.linalg.norm(vel, axis=1)
        bound = ROBOT.max_speed * dt + 0.5 * ROBOT.max_accel * dt**2
        assert np.max(np.abs(np.diff(pos[:, 0]))) <= bound + 1e-12
        assert np.max(np.abs(np.diff(speed))) <= ROBOT.max_accel * dt + 1e-9

    @settings(max_examples=100, deadline=None)
    @given(d=st.floats(0.01, 2.0), v=st.floats(0.5, 10.0), frac=st.floats(0.0, 1.0))
    def test_time_at_distance_inverts(self, d, v, frac):
        p = move(d, v)
        s = frac * d
        t = motion.time_at_distance(p, s)
        s_back, _ = motion.distance_at(p, t)
        assert float(s_back) == pytest.approx(s, abs=1e-9)


class TestPapTime:
    def test_example_distance(self):
        # object under the pick point, place point 0.9 m away in a straight line
        robot = RobotSpec(pick_height=0.05, place_height=0.05)
        ctx = np.array([0.0, 0.0, 0.9, 0.0])
        assert float(pap_time(ctx, robot, rim_height=0.0)) == pytest.approx(0.189737, abs=1e-6)

    def test_zero_distance(self):
        robot = RobotSpec(pick_height=0.1, place_height=0.0)
        assert float(pap_time(np.array([0.2, 0.3, 0.2, 0.3]), robot, rim_height=0.1)) == 0.0

    def test_randomised_mean(self):
        from throwsim.env import EnvConfig, sample_episodes

        batch = sample_episodes(EnvConfig(), 0, np.arange(10_000))
        t = pap_time(batch.context, ROBOT)
        assert 0.12 <= float(np.mean(t)) <= 0.25

    @settings(max_examples=100, deadline=None)
    @given(d1=st.floats(0.0, 1.0), d2=st.floats(0.0, 1.0))
    def test_monotone_in_distance(self, d1, d2):
        lo, hi = sorted((d1, d2))
        t_lo = pap_time(np.array([0.0, 0.0, lo, 0.0]), ROBOT)
        t_hi = pap_time(np.array([0.0, 0.0, hi, 0.0]), ROBOT)
        assert float(t_lo) <= float(t_hi) + 1e-15

    def test_overhead_added(self):
        ctx = np.array([0.0, 0.0, 0.5, 0.5])
        base = pap_time(ctx, ROBOT)
        assert float(pap_time(ctx, RobotSpec(pap_overhead=0.02))) == pytest.approx(float(base) + 0.02)


class TestRobotSpec:
    @pytest.mark.parametrize("field,value", [("max_speed", 0.0), ("max_accel", -1.0), ("pick_height", -0.1),
                                             ("max_speed", float("nan"))])
    def test_rejects(self, field, value):
        with pytest.raises(InvalidInputError):
            RobotSpec(**{field: value})
