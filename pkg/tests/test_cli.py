import subprocess
import sys

import pytest

from throwsim.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION, main


def run_pipeline(d):
    """Dataset, estimator, one short training run, evaluation and a synthetic sweep."""
    codes = [
        main(["gen-baseline", "--n", "1200", "--seed", "0", "--out", str(d / "data.csv")]),
        main(["train-baseline", "--data", str(d / "data.csv"), "--episodes", "3", "--out", str(d / "base.tsw")]),
        main(["train", "--algo", "ppo", "--preset", "sb3", "--episodes", "512", "--eval-every", "256",
              "--seed", "0", "1", "--baseline", str(d / "base.tsw"), "--out", str(d / "runs")]),
        main(["eval", str(d / "runs" / "ppo_sb3_seed0.tsw"), "--n", "200", "--baseline", str(d / "base.tsw"),
              "--out", str(d / "eval.csv"), "--episodes-out", str(d / "episodes.csv")]),
        main(["compare", "pap", str(d / "runs" / "ppo_sb3_seed1.tsw"), "--n", "200",
              "--baseline", str(d / "base.tsw"), "--out", str(d / "compare.csv")]),
        main(["sweep", "--algo", "sac", "--trials", "6", "--synthetic", "--out", str(d / "study.csv")]),
    ]
    return codes


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    dirs = [tmp_path_factory.mktemp(name) for name in ("a", "b")]
    return dirs, [run_pipeline(d) for d in dirs]


OUTPUTS = ["data.csv", "base.tsw", "runs/ppo_sb3_seed0.tsw", "runs/ppo_sb3_seed1.tsw", "runs/ppo_sb3_seed0_curve.csv",
           "eval.csv", "episodes.csv", "compare.csv", "study.csv"]


class TestPipeline:
    def test_all_steps_succeed(self, two_runs):
        _, codes = two_runs
        assert codes == [[EXIT_OK] * 6] * 2

    @pytest.mark.parametrize("name", OUTPUTS)
    def test_reruns_are_byte_identical(self, two_runs, name):
        (a, b), _ = two_runs
        assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_compare_table_rows(self, two_runs):
        (a, _), _ = two_runs
        lines = (a / "compare.csv").read_text().splitlines()
        assert [line.split(",")[0] for line in lines[1:]] == ["pap", "ppo_sb3_seed1"]

    def test_seeds_differ(self, two_runs):
        (a, _), _ = two_runs
        assert (a / "runs/ppo_sb3_seed0.tsw").read_bytes() != (a / "runs/ppo_sb3_seed1.tsw").read_bytes()


class TestExitCodes:
    def test_usage_errors(self, tmp_path):
        assert main([]) == EXIT_USAGE
        assert main(["fly"]) == EXIT_USAGE
        assert main(["train", "--algo", "ddpg", "--out", str(tmp_path)]) == EXIT_USAGE
        assert main(["gen-baseline", "--n", "0", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE
        assert main(["eval", "nothing.tsw", "--baseline", "b"]) == EXIT_USAGE
        assert main(["gen-baseline", "--out", str(tmp_path / "missing" / "x.csv")]) == EXIT_USAGE

    def test_help_and_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert main(["train", "--help"]) == EXIT_OK

    def test_validation_errors(self, tmp_path, capsys):
        bad = tmp_path / "c.yaml"
        bad.write_text("robot:\n  max_sped: 1\n")
        assert main(["gen-baseline", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_VALIDATION
        assert "max_sped" in capsys.readouterr().err
        junk = tmp_path / "junk.tsw"
        junk.write_bytes(b"not a policy")
        assert main(["eval", str(junk), "--baseline", str(junk)]) == EXIT_VALIDATION
        assert main(["eval", "pap", "--n", "5"]) == EXIT_VALIDATION
        (tmp_path / "d.csv").write_text("a,b\n1,2\n")
        assert main(["train-baseline", "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path / "b")]) \
            == EXIT_VALIDATION

    def test_runtime_error(self, tmp_path, monkeypatch):
        from throwsim import cli
        from throwsim.errors import DivergenceError

        def boom(*a, **k):
            raise DivergenceError("non-finite loss")

        monkeypatch.setattr(cli, "run_study", boom)
        assert main(["sweep", "--algo", "td3", "--synthetic", "--out", str(tmp_path / "s.csv")]) == EXIT_RUNTIME

    def test_console_script_module(self):
        out = subprocess.run([sys.executable, "-m", "throwsim.cli", "--version"], capture_output=True, text=True)
        assert out.returncode == 0 and out.stdout.startswith("throwsim")
