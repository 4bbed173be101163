import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import G, projectile

from throwsim import physics
from throwsim.env import Context, Scene, ThrowCommand
from throwsim.errors import DegenerateThrowError, InvalidInputError
from throwsim.motion import RobotSpec
from throwsim.physics import (BinSpec, GripperSpec, NoiseSpec, ObjectSpec, ballistic_land, perturb_release,
                              separation_delay, simulate_throw)

ROBOT = RobotSpec()
NO_NOISE = NoiseSpec(0.0, 0.0)


def scene(d1=0.010, d2=0.171, side=0.04, com=(0.0, 0.0), bin_xy=(0.0, 0.6), clearance=None):
    return Scene(ObjectSpec(0.03, side, np.array(com)), GripperSpec(d1, d2, 0.04, clearance),
                 BinSpec(np.array(bin_xy), 0.10, 0.10, 0.10))


class TestSeparationDelay:
    def test_partial_opening(self):
        d = separation_delay(ObjectSpec(0.02, 0.03), GripperSpec(0.010, 0.171, 0.04))
        assert float(d) == pytest.approx(0.138250, abs=1e-12)

    def test_wide_object_clamps(self):
        d = separation_delay(ObjectSpec(0.02, 0.05), GripperSpec(0.010, 0.171, 0.04))
        assert float(d) == pytest.approx(0.181, abs=1e-12)

    def test_delay_free(self):
        assert float(separation_delay(ObjectSpec(0.02, 0.03), GripperSpec(0.0, 0.0, 0.04))) == 0.0

    def test_clearance_model(self):
        d = separation_delay(ObjectSpec(0.02, 0.05), GripperSpec(0.010, 0.171, 0.04, release_clearance=0.010))
        assert float(d) == pytest.approx(0.010 + 0.25 * 0.171, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(InvalidInputError):
            GripperSpec(-0.001, 0.171, 0.04)


class TestBallisticLand:
    def test_free_fall(self):
        landing, t = ballistic_land([0, 0, 0.2], [0, 0, 0], 0.0)
        assert float(t) == pytest.approx(0.201927, abs=1e-6)
        np.testing.assert_allclose(landing, [0, 0], atol=1e-15)

    def test_horizontal_throw(self):
        landing, t = ballistic_land([0, 0, 0.3], [3, 0, 0], 0.0)
        t_ref = math.sqrt(2 * 0.3 / G)  # 0.2473097 s
        assert float(t) == pytest.approx(t_ref, abs=1e-12)
        np.testing.assert_allclose(landing, [3 * t_ref, 0], atol=1e-12)

    def test_vertical_launch_from_floor(self):
        landing, t = ballistic_land([0, 0, 0], [0, 0, 1], 0.0)
        assert float(t) == pytest.approx(2 / G, abs=1e-12)
        np.testing.assert_allclose(landing, [0, 0], atol=1e-15)

    def test_below_floor_moving_down(self):
        with pytest.raises(DegenerateThrowError):
            ballistic_land([0, 0, -0.1], [1, 0, -1], 0.0)

    def test_random_cases_against_oracle(self):
        rng = np.random.default_rng(0)
        p = np.column_stack([rng.uniform(-1, 1, 1000), rng.uniform(-1, 1, 1000), rng.uniform(0.0, 0.6, 1000)])
        v = rng.uniform(-5, 5, (1000, 3))
        landing, t = ballistic_land(p, v, 0.0)
        for i in range(1000):
            (x, y), t_ref = projectile(p[i], v[i], 0.0)
            assert landing[i, 0] == pytest.approx(x, abs=1e-9)
            assert landing[i, 1] == pytest.approx(y, abs=1e-9)
            assert t[i] == pytest.approx(t_ref, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(z=st.floats(0.0, 1.0), vx=st.floats(-10, 10), vy=st.floats(-10, 10), vz=st.floats(-5, 5))
    def test_range_bounded_by_speed_times_flight(self, z, vx, vy, vz):
        landing, t = ballistic_land([0, 0, z], [vx, vy, vz], 0.0)
        horizontal = float(np.hypot(*landing))
        assert horizontal <= math.hypot(vx, vy) * float(t) + 1e-12


class TestPerturbRelease:
    def test_centered_mass_is_identity(self):
        v = np.array([1.0, 2.0, -0.5])
        out = perturb_release(v, ObjectSpec(0.02, 0.04, np.zeros(2)), NoiseSpec(), np.random.default_rng(0))
        np.testing.assert_array_equal(out, v)

    def test_disabled_noise_is_identity(self):
        v = np.array([1.0, 2.0, -0.5])
        out = perturb_release(v, ObjectSpec(0.02, 0.04, np.array([0.01, 0.01])), NO_NOISE,
                              np.random.default_rng(0))
        np.testing.assert_array_equal(out, v)

    def test_speed_tail_bound(self):
        obj = ObjectSpec(0.02, 0.04, np.array([0.01, 0.01]))  # k = sqrt(2)
        v = np.tile([2.0, 0.0, 0.0], (10_000, 1))
        out = perturb_release(v, obj, NoiseSpec(), np.random.default_rng(2))
        ratio = np.linalg.norm(out, axis=1) / 2.0
        bound = 4 * 0.05 * math.sqrt(2)
        assert ratio.min() >= 1 - bound and ratio.max() <= 1 + bound

    def test_rotation_preserves_speed_without_speed_noise(self):
        obj = ObjectSpec(0.02, 0.04, np.array([0.01, 0.0]))
        v = np.random.default_rng(1).normal(size=(100, 3))
        out = perturb_release(v, obj, NoiseSpec(0.0, 5.0), np.random.default_rng(2))
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), np.linalg.norm(v, axis=1), rtol=1e-12)

    def test_com_offset_bound(self):
        with pytest.raises(InvalidInputError):
            ObjectSpec(0.02, 0.04, np.array([0.011, 0.0]))


def command(release=1.0, speed=10.0, height=0.05, reach=1.0):
    return ThrowCommand(np.float64(release), np.float64(speed), np.float64(height), np.float64(reach))


class TestSimulateThrow:
    ctx = Context(np.array([0.0, 0.0]), np.array([0.0, 0.6]))

    def test_placing_without_delay(self):
        out = simulate_throw(self.ctx, command(), scene(0.0, 0.0), ROBOT, np.random.default_rng(0), NO_NOISE)
        assert bool(out.success)
        np.testing.assert_allclose(out.landing, [0.0, 0.6], atol=1e-12)

    def test_release_at_target_with_full_delay(self):
        out = simulate_throw(self.ctx, command(), scene(0.010, 0.171, side=0.05), ROBOT,
                             np.random.default_rng(0), NO_NOISE)
        assert float(out.release_lag) > 0
        np.testing.assert_allclose(out.release_velocity, 0.0, atol=1e-15)
        np.testing.assert_allclose(out.landing, out.target_point[:2], atol=1e-12)

    def test_action_time_is_motion_duration(self):
        out = simulate_throw(self.ctx, command(release=0.3, speed=4.0, reach=0.5), scene(), ROBOT,
                             np.random.default_rng(0))
        dist = math.dist([0, 0, 0.05], [0, 0.3, 0.15])
        v = 4.0
        expected = 2 * math.sqrt(dist / 100) if math.sqrt(100 * dist) < v else 2 * v / 100 + (dist - v * v / 100) / v
        assert float(out.action_time) == pytest.approx(expected, abs=1e-12)

    def test_short_throw_fails(self):
        out = simulate_throw(self.ctx, command(release=0.0, speed=0.5, height=0.02, reach=0.05), scene(), ROBOT,
                             np.random.default_rng(0))
        assert not bool(out.success)

    def test_determinism(self):
        c = command(release=0.4, speed=7.0, height=0.1, reach=0.6)
        s = scene(com=(0.005, -0.004))
        a = simulate_throw(self.ctx, c, s, ROBOT, np.random.default_rng(5))
        b = simulate_throw(self.ctx, c, s, ROBOT, np.random.default_rng(5))
        for f in ("landing", "release_velocity", "action_time", "success"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_far_wall_guard(self):
        b = BinSpec(np.array([0.0, 0.3]), 0.10, 0.10, 0.05)
        up = np.array([0.0, 1.0])
        assert not bool(b.past_far_wall(np.array([0.0, 0.35]), up))
        assert bool(b.past_far_wall(np.array([0.0, 0.35 + 1e-9]), up))
        diag = np.array([1.0, 1.0]) / math.sqrt(2)
        support = (0.10 + 0.05) / math.sqrt(2)
        assert not bool(b.past_far_wall(np.array([0.0, 0.3]) + (support - 1e-9) * diag, diag))
        assert bool(b.past_far_wall(np.array([0.0, 0.3]) + (support + 1e-9) * diag, diag))

    def test_opening_boundary_counts(self):
        b = BinSpec(np.array([0.0, 0.0]), 0.10, 0.10, 0.10)
        assert bool(b.contains([0.10, -0.10]))
        assert not bool(b.contains([0.10 + 1e-12, 0.0]))


class TestBatchProperties:
    @pytest.fixture(scope="class")
    @classmethod
    def batch(cls):
        from throwsim.env import EnvConfig, decode_action, sample_episodes

        cfg = EnvConfig()
        b = sample_episodes(cfg, 4, np.arange(3000))
        raw = np.random.default_rng(0).uniform(-1, 1, (3000, 4))
        cmd = decode_action(raw, b.context, cfg)
        return b, cmd, physics.simulate_batch(b.context, cmd, b.scene, ROBOT, cfg.noise, b.draws)

    def test_success_implies_inside_opening(self, batch):
        b, _, out = batch
        ok = np.asarray(out.success)
        assert ok.any()
        hx, hy = b.scene.bin.half_extent_x[ok], b.scene.bin.half_extent_y[ok]
        d = np.abs(out.landing[ok] - b.context.bin_xy[ok])
        assert np.all(d[:, 0] <= hx) and np.all(d[:, 1] <= hy)

    def test_energy_sanity(self, batch):
        _, _, out = batch
        fine = np.isfinite(out.flight_time)
        horizontal = np.linalg.norm(out.landing[fine] - out.release_point[fine, :2], axis=1)
        bound = np.linalg.norm(out.release_velocity[fine, :2], axis=1) * out.flight_time[fine]
        assert np.all(horizontal <= bound + 1e-12)

    def test_batch_equals_single(self, batch):
        b, cmd, out = batch
        for i in (0, 17, 2999):
            one = physics.simulate_batch(b.context[i], cmd[i], b.scene[i], ROBOT, NoiseSpec(), b.draws[i])
            np.testing.assert_array_equal(one.landing, out.landing[i])
            assert bool(one.success) == bool(out.success[i])

    def test_delay_monotonicity(self):
        # decelerating separations: later separation never means a faster object
        ctx = Context(np.array([0.0, 0.0]), np.array([0.0, 0.8]))
        cmd = command(release=0.8, speed=6.0, height=0.1, reach=0.7)
        speeds = []
        for d2 in np.linspace(0.05, 0.3, 26):
            out = simulate_throw(ctx, cmd, scene(0.010, d2, side=0.05), ROBOT, np.random.default_rng(0), NO_NOISE)
            speeds.append(float(np.linalg.norm(out.release_velocity)))
        assert np.all(np.diff(speeds) <= 1e-12)
