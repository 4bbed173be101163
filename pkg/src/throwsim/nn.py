"""Dense networks with hand-written backprop, Adam, and Gaussian policy heads.

Everything is float64.  Weights are stored ``(fan_in, fan_out)`` so a batch of
row vectors ``x`` maps to ``x @ W + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidInputError

ACTIVATIONS = ("relu", "tanh", "identity")
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
LOG_2PI = np.log(2.0 * np.pi)
GSDE_EPS = 1e-6


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, y):
    if name == "relu":
        return (z > 0).astype(float)
    if name == "tanh":
        return 1.0 - y * y
    return None


@dataclass
class Mlp:
    """Multi-layer perceptron.

    ``activations[i]`` is applied after layer ``i``; the last entry is usually
    ``"identity"``.
    """

    sizes: tuple
    activations: tuple
    weights: list
    biases: list

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        self.activations = tuple(self.activations)
        if len(self.activations) != len(self.sizes) - 1:
            raise InvalidInputError("Mlp: need one activation per layer")
        for name in self.activations:
            if name not in ACTIVATIONS:
                raise InvalidInputError(f"Mlp: unknown activation {name!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise InvalidInputError(f"Mlp: layer {i} has shape {w.shape}/{b.shape}")

    @classmethod
    def create(cls, sizes, activations, rng: np.random.Generator, init: str = "uniform",
               gain: float = np.sqrt(2.0), out_gain: float = 1.0) -> "Mlp":
        """Randomly initialised network.

        ``init="uniform"`` draws weights and biases from U(-1/sqrt(fan_in),
        1/sqrt(fan_in)); ``init="orthogonal"`` uses orthogonal weights scaled
        by ``gain`` (``out_gain`` for the last layer) and zero biases.
        """
        sizes = tuple(int(s) for s in sizes)
        weights, biases = [], []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if init == "orthogonal":
                g = out_gain if i == len(sizes) - 2 else gain
                a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
                q, r = np.linalg.qr(a)
                q = q * np.sign(np.diag(r))
                w = q if n_in >= n_out else q.T
                weights.append(g * w.reshape(n_in, n_out))
                biases.append(np.zeros(n_out))
            else:
                bound = 1.0 / np.sqrt(n_in)
                weights.append(rng.uniform(-bound, bound, (n_in, n_out)))
                biases.append(rng.uniform(-bound, bound, n_out))
        return cls(sizes, tuple(activations), weights, biases)

    @property
    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, self.activations, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])

    def forward(self, x) -> np.ndarray:
        return self.forward_cache(x)[0]

    def forward_cache(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.sizes[0]:
            raise InvalidInputError(f"Mlp: expected input size {self.sizes[0]}, got {x.shape[-1]}")
        cache = []
        h = x
        for w, b, name in zip(self.weights, self.biases, self.activations):
            z = h @ w + b
            y = _act(name, z)
            cache.append((h, z, y))
            h = y
        return h, cache

    def backward(self, cache, upstream, need_input_grad: bool = True, need_param_grads: bool = True):
        """Gradients of ``sum(output * upstream)`` w.r.t. params and input."""
        g = np.asarray(upstream, dtype=float)
        if g.shape != cache[-1][2].shape:
            raise InvalidInputError(f"Mlp: upstream shape {g.shape} != output shape {cache[-1][2].shape}")
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            h, z, y = cache[i]
            d = _act_grad(self.activations[i], z, y)
            if d is not None:
                g = g * d
            if need_param_grads and g.ndim == 1:
                grads[2 * i] = np.outer(h, g)
                grads[2 * i + 1] = g.copy()
            elif need_param_grads:
                grads[2 * i] = h.T @ g
                grads[2 * i + 1] = g.sum(axis=0)
            if i > 0 or need_input_grad:
                g = g @ self.weights[i].T
        return grads, (g if need_input_grad else None)


def forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def gradients(net: Mlp, x, upstream):
    """Reverse-mode gradients of ``output . upstream`` (summed over the batch)."""
    _, cache = net.forward_cache(x)
    return net.backward(cache, upstream)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def like(cls, params, lr: float, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kw)


def adam_step(state: AdamState, params, grads, lr: float | None = None):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidInputError("adam_step: params, grads and moments differ in length")
    lr = state.lr if lr is None else lr
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    step = lr * np.sqrt(c2) / c1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise InvalidInputError(f"adam_step: grad shape {g.shape} != param shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= step * m / (np.sqrt(v) + state.eps * np.sqrt(c2))
    return params


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_by_global_norm(grads, max_norm: float):
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        return [g * scale for g in grads], norm
    return grads, norm


def polyak_update(target: Mlp, source: Mlp, tau: float):
    for pt, ps in zip(target.params, source.params):
        pt *= 1.0 - tau
        pt += tau * ps


def check_finite(*nets, what: str = "parameters"):
    for net in nets:
        params = net.params if isinstance(net, Mlp) else net
        for p in params:
            if not np.all(np.isfinite(p)):
                raise DivergenceError(f"non-finite {what} encountered")


# Gaussian policy heads ---------------------------------------------------------


def gaussian_logprob(x, mean, log_std) -> np.ndarray:
    """Log density of a diagonal Gaussian, summed over the last axis."""
    z = (x - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std, axis=-1) - 0.5 * np.shape(mean)[-1] * LOG_2PI


def log_one_minus_tanh2(u) -> np.ndarray:
    """Stable ``log(1 - tanh(u)^2)``."""
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


@dataclass
class GaussianHead:
    """Diagonal Gaussian over actions.

    With ``state_dependent`` false the log-std is a free parameter vector;
    otherwise it is produced by the policy network next to the mean.
    """

    action_dim: int
    log_std: np.ndarray | None = None
    state_dependent: bool = False
    squash: bool = False
    log_std_bounds: tuple = (LOG_STD_MIN, LOG_STD_MAX)

    @classmethod
    def create(cls, action_dim, log_std_init=0.0, state_dependent=False, squash=False) -> "GaussianHead":
        log_std = None if state_dependent else np.full(action_dim, float(log_std_init))
        return cls(action_dim, log_std, state_dependent, squash)

    def clamp(self, log_std):
        return np.clip(log_std, *self.log_std_bounds)

    def clamp_params(self):
        if self.log_std is not None:
            np.clip(self.log_std, *self.log_std_bounds, out=self.log_std)


def gaussian_sample_logprob(mean, log_std, rng: np.random.Generator | None = None, squash: bool = False,
                            eps=None):
    """Reparameterised sample and its exact log-probability.

    Returns ``(action, logprob, pre_squash, eps)``.  With ``squash`` the action
    is ``tanh`` of the Gaussian sample and the log-probability includes the
    change-of-variables term.
    """
    mean = np.asarray(mean, dtype=float)
    log_std = np.broadcast_to(np.asarray(log_std, dtype=float), mean.shape)
    if eps is None:
        eps = rng.standard_normal(mean.shape)
    u = mean + np.exp(log_std) * eps
    logp = np.sum(-0.5 * eps * eps - log_std, axis=-1) - 0.5 * mean.shape[-1] * LOG_2PI
    if not squash:
        return u, logp, u, eps
    return np.tanh(u), logp - np.sum(log_one_minus_tanh2(u), axis=-1), u, eps


# generalized state-dependent exploration ------------------------------------


def gsde_variance(features, log_std, eps: float = GSDE_EPS) -> np.ndarray:
    """Per-action variance ``sum_i f_i^2 exp(2 L_ij) + eps`` of gSDE noise."""
    return (features * features) @ np.exp(2.0 * log_std) + eps


def gsde_sample_matrix(log_std, rng: np.random.Generator):
    """Exploration matrix ``exp(L) * Z`` and the standard normal ``Z`` behind it."""
    z = rng.standard_normal(np.shape(log_std))
    return np.exp(log_std) * z, z


def gsde_logprob(u, mean, variance) -> np.ndarray:
    d = u - mean
    return np.sum(-0.5 * d * d / variance - 0.5 * np.log(variance), axis=-1) - 0.5 * np.shape(mean)[-1] * LOG_2PI


def gsde_grads(u, mean, features, log_std, weight):
    """Gradients of ``sum_b weight_b * logprob_b`` for fixed samples ``u``.

    Returns ``(d/dmean, d/dlog_std)``.  Features are treated as constants.
    """
    var = gsde_variance(features, log_std)
    d = u - mean
    w = np.asarray(weight, dtype=float)[:, None]
    g_mean = w * d / var
    g_var = w * (0.5 * d * d / (var * var) - 0.5 / var)
    g_log_std = 2.0 * np.exp(2.0 * log_std) * ((features * features).T @ g_var)
    return g_mean, g_log_std
