"""``throwsim`` command-line entry point.

Subcommands follow the pipeline order::

    throwsim gen-baseline   --n 110000 --out baseline_data.csv
    throwsim train-baseline --data baseline_data.csv --out baseline.tsw
    throwsim train          --algo sac --preset optuna --seed 0 1 2 --baseline baseline.tsw --out runs/
    throwsim eval           runs/sac_optuna_seed0.tsw --n 10000 --baseline baseline.tsw --out table.csv
    throwsim compare        pap hassan runs/sac_optuna_seed0.tsw --n 10000 --baseline baseline.tsw
    throwsim sweep          --algo ppo --trials 20 --episodes 20000 --baseline baseline.tsw --out study.csv

Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from . import __version__
from .agents import TRAINERS, HassanPolicy, PapPolicy, params_from_dict, preset
from .baseline import BaselineDataset, FitOptions, fit, generate_dataset
from .config import ToolkitConfig, load_config
from .env import ThrowEnv
from .errors import ConfigurationError, InvalidInputError, PersistenceError, ThrowSimError
from .evaluation import compare
from .persistence import load_policy, load_predictor, save_policy, save_predictor
from .tuning import run_study, synthetic_objective

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
ALGOS = tuple(TRAINERS)
POLICY_SUFFIX = ".tsw"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="throwsim", description="Delta-robot pick-and-throw toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML toolkit configuration")
    common.add_argument("--jobs", type=_count, default=1, metavar="N", help="worker processes (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")

    p = sub.add_parser("gen-baseline", parents=[common], help="generate the PaP-time dataset")
    p.add_argument("--n", type=_count, default=110_000)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out", required=True, metavar="PATH")

    p = sub.add_parser("train-baseline", parents=[common], help="fit the PaP-time estimator")
    p.add_argument("--data", metavar="PATH", help="dataset CSV from gen-baseline (default: generate --n rows)")
    p.add_argument("--n", type=_count, default=110_000)
    p.add_argument("--episodes", type=_count, default=FitOptions.epochs, help="training epochs")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out", required=True, metavar="PATH")

    p = sub.add_parser("train", parents=[common], help="train a throwing policy for one or more seeds")
    p.add_argument("--algo", required=True, choices=ALGOS)
    p.add_argument("--preset", default="optuna", metavar="{sb3,optuna,FILE}")
    p.add_argument("--episodes", type=_count, default=500_000)
    p.add_argument("--seed", type=_seed, nargs="+", metavar="N")
    p.add_argument("--eval-every", type=_count, default=1000, metavar="N")
    p.add_argument("--baseline", metavar="PATH")
    p.add_argument("--out", required=True, metavar="DIR")

    for name, text in (("eval", "evaluate one policy"), ("compare", "evaluate policies on shared episodes")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("policy", nargs=1 if name == "eval" else "+", metavar="POLICY",
                       help="weight file, 'pap' or 'hassan'")
        p.add_argument("--n", type=_count, default=10_000)
        p.add_argument("--seed", type=_seed)
        p.add_argument("--baseline", metavar="PATH")
        p.add_argument("--out", metavar="PATH", help="metrics table CSV")
        if name == "eval":
            p.add_argument("--episodes-out", metavar="PATH", help="per-episode CSV")

    p = sub.add_parser("sweep", parents=[common], help="random-search hyperparameter study")
    p.add_argument("--algo", required=True, choices=ALGOS)
    p.add_argument("--trials", type=_count, default=20)
    p.add_argument("--episodes", type=_count, default=20_000, help="training budget per trial")
    p.add_argument("--n", type=_count, default=1000, help="final evaluation episodes per trial")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--baseline", metavar="PATH")
    p.add_argument("--synthetic", action="store_true", help="score trials with the cheap synthetic objective")
    p.add_argument("--out", required=True, metavar="PATH")
    return parser


# helpers --------------------------------------------------------------------------


def _config(args) -> ToolkitConfig:
    return ToolkitConfig() if args.config is None else load_config(args.config)


def _seed_of(args, config: ToolkitConfig) -> int:
    return config.seed if args.seed is None else args.seed


def _baseline(args, config: ToolkitConfig):
    path = args.baseline or config.paths.get("baseline")
    if path is None:
        raise ConfigurationError("no baseline predictor: pass --baseline PATH or set paths.baseline")
    if not Path(path).is_file():
        raise UsageError(f"baseline file {path!r} does not exist")
    return load_predictor(path, expected_digest=None)


def _hyperparams(algo: str, name: str):
    if name in ("sb3", "optuna"):
        return preset(algo, name), name
    path = Path(name)
    if not path.is_file():
        raise UsageError(f"--preset must be sb3, optuna or an existing file, got {name!r}")
    with open(path) as fh:
        try:
            values = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise InvalidInputError(f"{path}: invalid preset file ({exc})") from None
    if not isinstance(values, dict):
        raise InvalidInputError(f"{path}: preset file must be a mapping of hyperparameters")
    try:
        return params_from_dict(algo, values), path.stem
    except TypeError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def _policy(spec: str, config: ToolkitConfig, jobs: int):
    if spec == "pap":
        return PapPolicy(), "pap"
    if spec == "hassan":
        return HassanPolicy(jobs=jobs), "hassan"
    if not Path(spec).is_file():
        raise UsageError(f"policy {spec!r} is neither pap, hassan nor an existing weight file")
    return load_policy(spec, expected_digest=config.env.digest()), Path(spec).stem


def _parent(path):
    parent = Path(path).parent
    if not parent.is_dir():
        raise UsageError(f"output directory {parent} does not exist")


# commands -------------------------------------------------------------------------


def cmd_gen_baseline(args) -> int:
    config = _config(args)
    _parent(args.out)
    data = generate_dataset(args.n, config.env, config.robot, _seed_of(args, config))
    data.to_csv(args.out)
    print(f"wrote {len(data)} rows to {args.out}")
    return EXIT_OK


def cmd_train_baseline(args) -> int:
    config = _config(args)
    seed = _seed_of(args, config)
    _parent(args.out)
    if args.data is not None:
        data = BaselineDataset.from_csv(args.data)
    else:
        data = generate_dataset(args.n, config.env, config.robot, seed)
    pred = fit(data, options=FitOptions(epochs=args.episodes, seed=seed))
    save_predictor(pred, args.out, env_digest=config.env.digest(), seed=seed)
    r = pred.report
    print(f"train MAE {1e3 * r.train_mae:.2f} ms, held-out MAE {1e3 * r.validation_mae:.2f} ms "
          f"({r.n_validation} samples), target met: {r.converged}")
    return EXIT_OK


def _train_one(algo, hp, tag, episodes, seed, eval_every, config, baseline, out_dir, verbose):
    env = ThrowEnv(config.env, config.robot, baseline, seed)

    def report(done, reward):
        if verbose:
            print(f"[{algo} seed {seed}] episode {done}: eval reward {1e3 * reward:.1f} ms", file=sys.stderr,
                  flush=True)
        return False

    result = TRAINERS[algo](env, hp, episodes, seed, eval_every=eval_every, report=report)
    stem = Path(out_dir) / f"{algo}_{tag}_seed{seed}"
    save_policy(result.policy, f"{stem}{POLICY_SUFFIX}")
    result.curve.to_csv(f"{stem}_curve.csv")
    return f"{stem}{POLICY_SUFFIX}", result.curve.mean_reward[-1], result.curve.success_rate[-1]


def cmd_train(args) -> int:
    config = _config(args)
    hp, tag = _hyperparams(args.algo, args.preset)
    seeds = args.seed if args.seed is not None else [config.seed]
    if len(set(seeds)) != len(seeds):
        raise UsageError("--seed values must be distinct")
    if not Path(args.out).is_dir():
        os.makedirs(args.out)
    baseline = _baseline(args, config)
    jobs = [(args.algo, hp, tag, args.episodes, s, args.eval_every, config, baseline, args.out, args.verbose)
            for s in seeds]
    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(min(args.jobs, len(seeds))) as pool:
            results = list(pool.map(_train_one, *zip(*jobs)))
    else:
        results = [_train_one(*j) for j in jobs]
    for path, reward, success in results:
        print(f"{path}: final eval reward {1e3 * reward:.1f} ms, success {100 * success:.1f} %")
    return EXIT_OK


def _evaluate(args, specs) -> int:
    config = _config(args)
    if args.out is not None:
        _parent(args.out)
    baseline = _baseline(args, config)
    loaded = [_policy(s, config, args.jobs) for s in specs]
    table = compare([p for p, _ in loaded], args.n, config.env, _seed_of(args, config), config.robot, baseline,
                    labels=[label for _, label in loaded])
    print(table.render())
    for policy, label in loaded:
        if getattr(policy, "infeasible", 0):
            print(f"{label}: {policy.infeasible} context(s) infeasible, placed instead", file=sys.stderr)
    if args.out is not None:
        table.to_csv(args.out)
    if getattr(args, "episodes_out", None):
        _parent(args.episodes_out)
        table.episodes[0].to_csv(args.episodes_out)
    return EXIT_OK


def cmd_eval(args) -> int:
    return _evaluate(args, args.policy)


def cmd_compare(args) -> int:
    return _evaluate(args, args.policy)


def cmd_sweep(args) -> int:
    config = _config(args)
    _parent(args.out)
    seed = _seed_of(args, config)
    if args.synthetic:
        study = run_study(args.algo, args.trials, args.episodes, args.n, seed, objective=synthetic_objective())
    else:
        env = ThrowEnv(config.env, config.robot, _baseline(args, config), seed)
        study = run_study(args.algo, args.trials, args.episodes, args.n, seed, env=env)
    study.to_csv(args.out)
    best = study.best
    print(f"{len(study.completed)} complete, {study.n_pruned} pruned, "
          f"{len(study.trials) - len(study.completed) - study.n_pruned} failed; "
          f"best trial {best.trial_id} score {best.final_score:.6g}")
    return EXIT_OK


COMMANDS = {
    "gen-baseline": cmd_gen_baseline,
    "train-baseline": cmd_train_baseline,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"throwsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, PersistenceError, ConfigurationError) as exc:
        print(f"throwsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ThrowSimError, OSError) as exc:
        print(f"throwsim: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
