"""Soft Actor-Critic specialised to one-step episodes.

The critics regress onto the reward (there is no next state whose entropy
could be added), the actor is a tanh-squashed Gaussian, and the entropy
temperature is tuned automatically towards ``-action_dim``.

With ``use_sde`` the exploration noise is ``features @ (exp(L) * Z)`` where
``features`` is the actor's last hidden layer.  The features are treated as
constants when differentiating the noise term.
"""
from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import DivergenceError
from .common import (EVAL_EPISODES, EVAL_EVERY, BanditEnv, LearnedPolicy, ReportFn, TrainResult, env_digest,
                     normalize_obs, run_off_policy)
from .hyperparams import SACParams
from .td3 import _critic

MEAN_CLIP = 2.0


class SACAgent:
    def __init__(self, env: BanditEnv, hp: SACParams, seed: int):
        rng = np.random.default_rng([seed, 0])
        self.env, self.hp, self.seed = env, hp, seed
        arch = tuple(hp.net_arch)
        a_dim = env.action_dim
        out = a_dim if hp.use_sde else 2 * a_dim
        self.actor = nn.Mlp.create((env.obs_dim, *arch, out), ("relu",) * len(arch) + ("identity",), rng)
        self.critics = [_critic(env.obs_dim, a_dim, arch, rng) for _ in range(2)]
        self.critic_targets = [c.copy() for c in self.critics]
        self.log_std = np.full((arch[-1], a_dim), float(hp.log_std_init)) if hp.use_sde else None
        self.log_alpha = np.zeros(1)
        self.target_entropy = -float(a_dim) if hp.target_entropy is None else float(hp.target_entropy)
        actor_params = self.actor.params + ([self.log_std] if hp.use_sde else [])
        self.actor_opt = nn.AdamState.like(actor_params, hp.learning_rate)
        self.critic_opt = nn.AdamState.like(self.critics[0].params + self.critics[1].params, hp.learning_rate)
        self.alpha_opt = nn.AdamState.like([self.log_alpha], hp.learning_rate)
        self.updates = 0
        self.noise_rng = np.random.default_rng([seed, 3])
        self.explore_matrix = None

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def normalize(self, obs):
        return normalize_obs(obs, self.env.obs_low, self.env.obs_high)

    def policy(self, copy: bool = False) -> LearnedPolicy:
        actor = self.actor.copy() if copy else self.actor
        log_std = None if self.log_std is None else (self.log_std.copy() if copy else self.log_std)
        return LearnedPolicy("sac", actor, self.env.obs_low.copy(), self.env.obs_high.copy(), self.hp,
                             seed=self.seed, env_digest=env_digest(self.env), log_std=log_std)

    def _mean(self, out):
        if self.hp.use_sde:
            return np.clip(out, -MEAN_CLIP, MEAN_CLIP), None
        mean, log_std = np.split(out, 2, axis=-1)
        return mean, np.clip(log_std, nn.LOG_STD_MIN, nn.LOG_STD_MAX)

    def explore(self, obs, rng) -> np.ndarray:
        out, cache = self.actor.forward_cache(self.normalize(obs))
        mean, log_std = self._mean(out)
        if not self.hp.use_sde:
            return np.tanh(mean + np.exp(log_std) * rng.standard_normal(mean.shape))
        features = cache[-1][0]
        actions = np.empty_like(mean)
        freq = self.hp.sde_sample_freq
        for i in range(len(mean)):
            if i == 0 or (freq > 0 and i % freq == 0):
                self.explore_matrix, _ = nn.gsde_sample_matrix(self.log_std, rng)
            actions[i] = np.tanh(mean[i] + features[i] @ self.explore_matrix)
        return actions

    def _actor_sample(self, obs):
        """Reparameterised actions with log-probs and a closure for gradients."""
        out, cache = self.actor.forward_cache(obs)
        mean, log_std = self._mean(out)
        if not self.hp.use_sde:
            a, logp, u, eps = nn.gaussian_sample_logprob(mean, log_std, self.noise_rng, squash=True)
            return out, cache, a, logp, u, (log_std, eps)
        features = cache[-1][0]
        mat, _ = nn.gsde_sample_matrix(self.log_std, self.noise_rng)
        noise = features @ mat
        u = mean + noise
        var = nn.gsde_variance(features, self.log_std)
        a = np.tanh(u)
        logp = nn.gsde_logprob(u, mean, var) - np.sum(nn.log_one_minus_tanh2(u), axis=-1)
        return out, cache, a, logp, u, (features, mat, noise, var)

    def update(self, obs, actions, rewards):
        b = len(rewards)
        out, a_cache, a_pi, logp, u, extra = self._actor_sample(obs)

        # temperature
        alpha = self.alpha
        g_alpha = np.array([-np.mean(logp + self.target_entropy)])
        nn.adam_step(self.alpha_opt, [self.log_alpha], [g_alpha])

        # critics
        x = np.concatenate([obs, actions], axis=1)
        grads, loss = [], 0.0
        for critic in self.critics:
            q, cache = critic.forward_cache(x)
            err = q[:, 0] - rewards
            loss += 0.5 * float(np.mean(err * err))
            g, _ = critic.backward(cache, (err / b)[:, None], need_input_grad=False)
            grads += g
        if not np.isfinite(loss):
            raise DivergenceError(f"sac: non-finite critic loss after {self.updates} updates")
        nn.adam_step(self.critic_opt, self.critics[0].params + self.critics[1].params, grads)

        # actor: minimise mean(alpha * logp - min(Q1, Q2))
        xa = np.concatenate([obs, a_pi], axis=1)
        q_pairs = [c.forward_cache(xa) for c in self.critics]
        pick = q_pairs[0][0][:, 0] <= q_pairs[1][0][:, 0]
        d_action = np.zeros_like(a_pi)
        for k, (critic, (q, cache)) in enumerate(zip(self.critics, q_pairs)):
            mask = pick if k == 0 else ~pick
            upstream = np.where(mask, -1.0 / b, 0.0)[:, None]
            _, dx = critic.backward(cache, upstream, need_param_grads=False)
            d_action += dx[:, obs.shape[1]:]
        d_u = d_action * (1.0 - a_pi * a_pi) + (alpha / b) * 2.0 * a_pi
        if not self.hp.use_sde:
            log_std, eps = extra
            raw_log_std = np.split(out, 2, axis=-1)[1]
            inside = (raw_log_std >= nn.LOG_STD_MIN) & (raw_log_std <= nn.LOG_STD_MAX)
            d_log_std = (d_u * np.exp(log_std) * eps - alpha / b) * inside
            g, _ = self.actor.backward(a_cache, np.concatenate([d_u, d_log_std], axis=1), need_input_grad=False)
            nn.adam_step(self.actor_opt, self.actor.params, g)
        else:
            features, mat, noise, var = extra
            d_mean = d_u * (np.abs(out) <= MEAN_CLIP)
            g_noise = d_u - (alpha / b) * noise / var
            g_var = (alpha / b) * (0.5 * noise * noise / (var * var) - 0.5 / var)
            g_log_std = (features.T @ g_noise) * mat + 2.0 * np.exp(2.0 * self.log_std) * ((features * features).T @ g_var)
            g, _ = self.actor.backward(a_cache, d_mean, need_input_grad=False)
            nn.adam_step(self.actor_opt, self.actor.params + [self.log_std], g + [g_log_std])
            np.clip(self.log_std, nn.LOG_STD_MIN, nn.LOG_STD_MAX, out=self.log_std)
        for target, source in zip(self.critic_targets, self.critics):
            nn.polyak_update(target, source, self.hp.tau)
        self.updates += 1

    def check(self):
        nn.check_finite(self.actor, *self.critics)
        extra = [self.log_alpha] + ([self.log_std] if self.log_std is not None else [])
        nn.check_finite(extra, what="sac temperature or log-std")


def sac_train(env: BanditEnv, hp: SACParams | None = None, episodes: int = 500_000, seed: int = 0,
              eval_every: int = EVAL_EVERY, eval_episodes: int = EVAL_EPISODES,
              report: ReportFn | None = None) -> TrainResult:
    hp = SACParams() if hp is None else hp
    agent = SACAgent(env, hp, seed)
    return run_off_policy(agent, env, hp, episodes, seed, eval_every, eval_episodes, report)
