"""Portable weight files for policies and baseline predictors.

Layout::

    b"THROWSIM1\\n"
    uint64 little-endian   header length in bytes
    header                 UTF-8 JSON, sorted keys, no whitespace
    payload                arrays listed in header["arrays"], in order,
                           little-endian float64, row-major

The header records the file kind, format version, algorithm tag,
hyperparameters, environment-config digest and training seed, plus the
name and shape of every array.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from . import nn
from .agents.common import LearnedPolicy
from .agents.hyperparams import params_from_dict
from .baseline import BaselinePredictor, FitReport
from .errors import PersistenceError

MAGIC = b"THROWSIM1\n"
FORMAT_VERSION = 1


def write_container(path, header: dict, arrays: list[tuple[str, np.ndarray]]):
    header = dict(header)
    header["format_version"] = FORMAT_VERSION
    header["arrays"] = [{"name": name, "shape": list(np.shape(a))} for name, a in arrays]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_container(path, kind: str | None = None) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise PersistenceError(f"{path}: not a weight file (bad magic)")
    pos = len(MAGIC)
    try:
        (size,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        header = json.loads(data[pos:pos + size].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"{path}: corrupted header ({exc})") from None
    if not isinstance(header, dict):
        raise PersistenceError(f"{path}: corrupted header (not an object)")
    pos += size
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise PersistenceError(f"{path}: format version {version!r} does not match supported {FORMAT_VERSION}")
    if kind is not None and header.get("kind") != kind:
        raise PersistenceError(f"{path}: expected a {kind} file, found {header.get('kind')!r}")
    arrays = {}
    try:
        for spec in header["arrays"]:
            shape = tuple(int(s) for s in spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = pos + 8 * count
            if end > len(data):
                raise PersistenceError(f"{path}: payload truncated in array {spec['name']!r}")
            arrays[spec["name"]] = np.frombuffer(data[pos:end], dtype="<f8").astype(float).reshape(shape)
            pos = end
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"{path}: corrupted array table ({exc})") from None
    if pos != len(data):
        raise PersistenceError(f"{path}: {len(data) - pos} trailing bytes after payload")
    return header, arrays


def _check_digest(path, header, expected):
    if expected is not None and header.get("env_digest") != expected:
        raise PersistenceError(
            f"{path}: env-config digest {header.get('env_digest')!r} does not match expected {expected!r}"
        )


def _net_arrays(net: nn.Mlp, prefix: str):
    out = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out += [(f"{prefix}.W{i}", w), (f"{prefix}.b{i}", b)]
    return out


def _net_from(arrays, prefix: str, sizes, activations) -> nn.Mlp:
    n = len(sizes) - 1
    try:
        weights = [arrays[f"{prefix}.W{i}"] for i in range(n)]
        biases = [arrays[f"{prefix}.b{i}"] for i in range(n)]
    except KeyError as exc:
        raise PersistenceError(f"missing array {exc}") from None
    try:
        return nn.Mlp(tuple(sizes), tuple(activations), weights, biases)
    except ValueError as exc:
        raise PersistenceError(f"inconsistent network layers: {exc}") from None


def save_policy(policy: LearnedPolicy, path):
    header = {
        "kind": "policy",
        "algo": policy.tag,
        "hyperparams": policy.hyperparams.to_dict(),
        "env_digest": policy.env_digest,
        "seed": int(policy.seed),
        "sizes": list(policy.actor.sizes),
        "activations": list(policy.actor.activations),
        "has_log_std": policy.log_std is not None,
    }
    arrays = [("obs_low", policy.obs_low), ("obs_high", policy.obs_high)] + _net_arrays(policy.actor, "actor")
    if policy.log_std is not None:
        arrays.append(("log_std", policy.log_std))
    write_container(path, header, arrays)


def load_policy(path, expected_digest: str | None = None) -> LearnedPolicy:
    header, arrays = read_container(path, "policy")
    _check_digest(path, header, expected_digest)
    try:
        hp = params_from_dict(header["algo"], header["hyperparams"])
        actor = _net_from(arrays, "actor", header["sizes"], header["activations"])
        return LearnedPolicy(
            tag=header["algo"], actor=actor, obs_low=arrays["obs_low"], obs_high=arrays["obs_high"],
            hyperparams=hp, seed=int(header["seed"]), env_digest=header["env_digest"],
            log_std=arrays.get("log_std") if header["has_log_std"] else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"{path}: corrupted policy header ({exc})") from None


def save_predictor(pred: BaselinePredictor, path, env_digest: str = "", seed: int = 0):
    report = None if pred.report is None else vars(pred.report)
    header = {
        "kind": "baseline",
        "algo": "baseline",
        "hyperparams": {},
        "env_digest": env_digest,
        "seed": int(seed),
        "sizes": list(pred.net.sizes),
        "activations": list(pred.net.activations),
        "y_mean": pred.y_mean,
        "y_std": pred.y_std,
        "report": report,
    }
    arrays = [("x_mean", pred.x_mean), ("x_std", pred.x_std)] + _net_arrays(pred.net, "net")
    write_container(path, header, arrays)


def load_predictor(path, expected_digest: str | None = None) -> BaselinePredictor:
    header, arrays = read_container(path, "baseline")
    _check_digest(path, header, expected_digest)
    try:
        report = header["report"]
        return BaselinePredictor(
            net=_net_from(arrays, "net", header["sizes"], header["activations"]),
            x_mean=arrays["x_mean"], x_std=arrays["x_std"],
            y_mean=float(header["y_mean"]), y_std=float(header["y_std"]),
            report=None if report is None else FitReport(**report),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"{path}: corrupted baseline header ({exc})") from None


def read_header(path) -> dict:
    return read_container(path)[0]
