import numpy as np
import pytest

from throwsim.agents import HassanPolicy, LearnedPolicy, PapPolicy, TD3Params
from throwsim.env import EnvConfig
from throwsim.errors import InvalidInputError
from throwsim.evaluation import ComparisonTable, EpisodeArrays, Metrics, compare, evaluate
from throwsim.nn import Mlp
from throwsim.physics import NoiseSpec


def random_policy(config, seed=0):
    low, high = config.context_bounds
    actor = Mlp.create((4, 16, 4), ("relu", "tanh"), np.random.default_rng(seed))
    return LearnedPolicy("td3", actor, low, high, TD3Params())


class TestEvaluate:
    def test_pap_noise_free(self, robot, exact_baseline):
        cfg = EnvConfig().replace(noise=NoiseSpec(0.0, 0.0))
        m = evaluate(PapPolicy(), 400, cfg, 0, robot, exact_baseline)
        assert m.success_rate == 1.0
        assert m.distance_ratio == pytest.approx(1.0, abs=1e-12)
        assert m.mean_impact_distance == pytest.approx(0.0, abs=1e-12)
        assert m.mean_reward == pytest.approx(0.0, abs=1e-12)

    def test_hassan_throws_short(self, config, robot, exact_baseline):
        m = evaluate(HassanPolicy(), 10, config, 0, robot, exact_baseline)
        assert m.distance_ratio < 0.25

    def test_invariants(self, config, robot, exact_baseline):
        m = evaluate(random_policy(config), 300, config, 1, robot, exact_baseline)
        assert 0 <= m.success_rate <= 1
        assert min(m.std_reward, m.std_time, m.std_impact_distance) >= 0
        assert m.n_episodes == 300

    def test_rejects_zero(self, config):
        with pytest.raises(InvalidInputError):
            evaluate(PapPolicy(), 0, config, 0)

    def test_needs_an_episode(self):
        with pytest.raises(InvalidInputError):
            Metrics.from_episodes(EpisodeArrays(0, *(np.zeros((0, k)) for k in (1, 4, 4, 1, 1, 2, 1, 1))))


class TestCompare:
    def test_single_policy_matches_evaluate(self, config, robot, exact_baseline):
        pol = random_policy(config)
        table = compare([pol], 200, config, 3, robot, exact_baseline)
        assert len(table) == 1
        assert table.rows[0] == evaluate(pol, 200, config, 3, robot, exact_baseline)

    def test_same_policy_twice(self, config, robot, exact_baseline):
        pol = random_policy(config)
        table = compare([pol, pol], 200, config, 3, robot, exact_baseline, labels=["a", "a"])
        assert table.rows[0] == table.rows[1]

    def test_paired_episodes(self, config, robot, exact_baseline):
        table = compare([PapPolicy(), random_policy(config)], 150, config, 4, robot, exact_baseline)
        a, b = table.episodes
        np.testing.assert_array_equal(a.context, b.context)
        np.testing.assert_array_equal(a.episodes, b.episodes)

    def test_label_count_checked(self, config):
        with pytest.raises(InvalidInputError):
            compare([PapPolicy()], 10, config, 0, labels=["a", "b"])
        with pytest.raises(InvalidInputError):
            compare([], 10, config, 0)

    def test_metrics_recomputed_from_csv(self, config, robot, exact_baseline, tmp_path):
        table = compare([random_policy(config, 2)], 300, config, 5, robot, exact_baseline)
        table.episodes[0].to_csv(tmp_path / "ep.csv")
        back = Metrics.from_episodes(EpisodeArrays.from_csv(tmp_path / "ep.csv"), table.rows[0].label)
        assert back == table.rows[0]


class TestRendering:
    def test_table_one_format(self):
        # a typical learned-policy row, used as a formatting fixture
        row = Metrics("td3_sb3", 10_000, 0.057, 0.051, 0.8901, 0.107, 0.039, 0.44, 0.069, 0.0)
        formatted = ComparisonTable([row], []).formatted()[0]
        assert formatted == ["td3_sb3", "57.0", "51.0", "89.01", "107.0", "39.0", "44.0", "6.90", "0.00", "10000"]

    def test_render_aligned(self):
        rows = [Metrics("pap", 10, 0.0, 0.0, 1.0, 0.18, 0.02, 1.0, 0.0, 0.0),
                Metrics("a_long_label", 10, 0.05, 0.01, 0.9, 0.1, 0.03, 0.5, 0.07, 0.02)]
        lines = ComparisonTable(rows, []).render().splitlines()
        assert len(lines) == 4
        assert len({len(line) for line in lines}) == 1
        assert lines[0].startswith("policy")

    def test_csv(self, tmp_path):
        rows = [Metrics("pap", 10, 0.0, 0.0, 1.0, 0.18, 0.02, 1.0, 0.0, 0.0)]
        ComparisonTable(rows, []).to_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0].split(",") == list(ComparisonTable.HEADER)
        assert lines[1] == "pap,0.0,0.0,100.00,180.0,20.0,100.0,0.00,0.00,10"
