"""Learned estimate of the Pick-and-Place time for a context.

The reward of a successful throw is this estimate minus the throw's action
time, so the estimator is fitted once, up front, on PaP times computed by
:func:`throwsim.motion.pap_time` and then frozen.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import env as env_mod
from . import motion, nn
from .errors import ConfigurationError, InvalidInputError


DATASET_COLUMNS = ("object_x", "object_y", "bin_x", "bin_y", "pap_time_s")


@dataclass(frozen=True)
class BaselineDataset:
    contexts: np.ndarray
    times: np.ndarray

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for c, t in zip(self.contexts, self.times):
            yield env_mod.Context.from_array(c), float(t)

    def to_csv(self, path) -> int:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(DATASET_COLUMNS)
            for c, t in zip(self.contexts, self.times):
                writer.writerow([repr(float(v)) for v in (*c, t)])
        return len(self)

    @classmethod
    def from_csv(cls, path) -> "BaselineDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != DATASET_COLUMNS:
                raise InvalidInputError(f"{path}: expected columns {', '.join(DATASET_COLUMNS)}")
            try:
                rows = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, 5)
            except ValueError as exc:
                raise InvalidInputError(f"{path}: malformed row ({exc})") from None
        return cls(rows[:, :4], rows[:, 4])


def generate_dataset(n: int, config: env_mod.EnvConfig, robot: motion.RobotSpec, seed: int) -> BaselineDataset:
    """``n`` randomised contexts labelled with their PaP time at full speed."""
    if n < 1:
        raise InvalidInputError("generate_dataset: n must be >= 1")
    batch = env_mod.sample_episodes(config, seed, np.arange(n))
    contexts = batch.context.as_array()
    return BaselineDataset(contexts, motion.pap_time(contexts, robot, config.rim_height))


@dataclass
class FitOptions:
    epochs: int = 40
    batch_size: int = 256
    learning_rate: float = 1e-3
    final_learning_rate: float = 1e-5
    hidden: int = 100
    seed: int = 0
    target_mae: float = 0.005


@dataclass
class FitReport:
    train_mae: float
    validation_mae: float
    n_train: int
    n_validation: int
    epochs: int
    converged: bool


@dataclass
class BaselinePredictor:
    """4 -> hidden (ReLU) -> 1 network with input and output standardisation."""

    net: nn.Mlp | None = None
    x_mean: np.ndarray = field(default_factory=lambda: np.zeros(4))
    x_std: np.ndarray = field(default_factory=lambda: np.ones(4))
    y_mean: float = 0.0
    y_std: float = 1.0
    report: FitReport | None = None

    @property
    def fitted(self) -> bool:
        return self.net is not None

    def _features(self, contexts):
        return (contexts - self.x_mean) / self.x_std

    def raw_predict(self, contexts) -> np.ndarray:
        y = self.net.forward(self._features(contexts))[..., 0]
        return y * self.y_std + self.y_mean

    def predict(self, context) -> np.ndarray:
        if not self.fitted:
            raise ConfigurationError("baseline predictor has not been fitted")
        c = context.as_array() if hasattr(context, "as_array") else np.asarray(context, dtype=float)
        return np.maximum(self.raw_predict(c), 0.0)


def _mae(pred: BaselinePredictor, contexts, times) -> float:
    if len(times) == 0:
        return float("nan")
    return float(np.mean(np.abs(pred.predict(contexts) - times)))


def fit(dataset: BaselineDataset, split: float = 1 / 11, options: FitOptions | None = None) -> BaselinePredictor:
    """Fit the estimator by minibatch Adam on mean squared error.

    The last ``split`` fraction of the dataset is held out; its mean absolute
    error is recorded in the report.  Missing the MAE target is reported via
    ``report.converged`` rather than raised.
    """
    options = FitOptions() if options is None else options
    n = len(dataset)
    if n < 1000:
        raise InvalidInputError("fit: need at least 1000 samples")
    n_val = int(round(n * split))
    x_train, y_train = dataset.contexts[: n - n_val], dataset.times[: n - n_val]
    x_val, y_val = dataset.contexts[n - n_val:], dataset.times[n - n_val:]

    rng = np.random.default_rng(options.seed)
    pred = BaselinePredictor(
        net=nn.Mlp.create((4, options.hidden, 1), ("relu", "identity"), rng),
        x_mean=x_train.mean(axis=0),
        x_std=np.where(x_train.std(axis=0) > 0, x_train.std(axis=0), 1.0),
        y_mean=float(y_train.mean()),
        y_std=float(y_train.std()) if y_train.std() > 0 else 1.0,
    )
    features = pred._features(x_train)
    targets = ((y_train - pred.y_mean) / pred.y_std)[:, None]
    adam = nn.AdamState.like(pred.net.params, options.learning_rate)
    steps_per_epoch = max(1, int(np.ceil(len(targets) / options.batch_size)))
    total = options.epochs * steps_per_epoch
    decay = (options.final_learning_rate / options.learning_rate) ** (1.0 / max(total - 1, 1))
    lr = options.learning_rate
    for _ in range(options.epochs):
        order = rng.permutation(len(targets))
        for k in range(steps_per_epoch):
            idx = order[k * options.batch_size:(k + 1) * options.batch_size]
            out, cache = pred.net.forward_cache(features[idx])
            upstream = 2.0 * (out - targets[idx]) / len(idx)
            grads, _ = pred.net.backward(cache, upstream, need_input_grad=False)
            nn.adam_step(adam, pred.net.params, grads, lr)
            lr *= decay
    nn.check_finite(pred.net)
    val_mae = _mae(pred, x_val, y_val)
    pred.report = FitReport(
        train_mae=_mae(pred, x_train, y_train),
        validation_mae=val_mae,
        n_train=len(y_train),
        n_validation=len(y_val),
        epochs=options.epochs,
        converged=bool(n_val == 0 or val_mae <= options.target_mae),
    )
    return pred


def predict(predictor: BaselinePredictor, context) -> np.ndarray:
    return predictor.predict(context)


def default_predictor(config: env_mod.EnvConfig | None = None, robot: motion.RobotSpec | None = None,
                      n: int = 110_000, seed: int = 0, options: FitOptions | None = None) -> BaselinePredictor:
    """Generate the standard dataset and fit on it."""
    config = env_mod.EnvConfig() if config is None else config
    robot = motion.RobotSpec() if robot is None else robot
    return fit(generate_dataset(n, config, robot, seed), options=options)
