"""Proximal Policy Optimisation specialised to one-step episodes.

Each rollout is ``n_steps`` independent episodes.  With a horizon of one the
generalised advantage estimate collapses to ``r - V(c)`` whatever the value of
``gae_lambda``; the parameter is kept for completeness and flagged as inert in
the learning-curve metadata.
"""
from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import DivergenceError, InvalidInputError
from .common import (EVAL_EPISODES, EVAL_EVERY, BanditEnv, EpisodeStream, LearnedPolicy, ReportFn, Schedule,
                     TrainResult, env_digest, normalize_obs)
from .hyperparams import PPOParams

ADAM_EPS = 1e-5
LOG_2PI_E = np.log(2.0 * np.pi * np.e)


class PPOAgent:
    def __init__(self, env: BanditEnv, hp: PPOParams, seed: int):
        rng = np.random.default_rng([seed, 0])
        self.env, self.hp, self.seed = env, hp, seed
        arch = tuple(hp.net_arch)
        hidden = (hp.activation,) * len(arch)
        self.actor = nn.Mlp.create((env.obs_dim, *arch, env.action_dim), hidden + ("identity",), rng,
                                   init="orthogonal", gain=np.sqrt(2.0), out_gain=0.01)
        self.critic = nn.Mlp.create((env.obs_dim, *arch, 1), hidden + ("identity",), rng,
                                    init="orthogonal", gain=np.sqrt(2.0), out_gain=1.0)
        shape = (arch[-1], env.action_dim) if hp.use_sde else (env.action_dim,)
        self.log_std = np.full(shape, float(hp.log_std_init))
        self.opt = nn.AdamState.like(self._params(), hp.learning_rate, eps=ADAM_EPS)
        self.explore_matrix = None
        self.updates = 0
        self.last_clip_fraction = 0.0

    def _params(self):
        return self.actor.params + self.critic.params + [self.log_std]

    def normalize(self, obs):
        return normalize_obs(obs, self.env.obs_low, self.env.obs_high)

    def policy(self, copy: bool = False) -> LearnedPolicy:
        actor = self.actor.copy() if copy else self.actor
        log_std = self.log_std.copy() if copy else self.log_std
        return LearnedPolicy("ppo", actor, self.env.obs_low.copy(), self.env.obs_high.copy(), self.hp,
                             seed=self.seed, env_digest=env_digest(self.env), log_std=log_std)

    def _logprob(self, mean, features, u):
        if self.hp.use_sde:
            return nn.gsde_logprob(u, mean, nn.gsde_variance(features, self.log_std))
        return nn.gaussian_logprob(u, mean, self.log_std)

    def collect(self, obs, rng):
        """Sample raw (unclipped) actions and their log-probs for a rollout."""
        x = self.normalize(obs)
        mean, cache = self.actor.forward_cache(x)
        if self.hp.use_sde:
            features = cache[-1][0]
            noise = np.empty_like(mean)
            freq = self.hp.sde_sample_freq
            for i in range(len(mean)):
                if i == 0 or (freq > 0 and i % freq == 0):
                    self.explore_matrix, _ = nn.gsde_sample_matrix(self.log_std, rng)
                noise[i] = features[i] @ self.explore_matrix
            u = mean + noise
        else:
            features = None
            u = mean + np.exp(self.log_std) * rng.standard_normal(mean.shape)
        return x, u, self._logprob(mean, features, u), self.critic.forward(x)[:, 0]

    def update(self, x, u, old_logp, returns, advantages):
        hp = self.hp
        b = len(returns)
        if b > 1:
            advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
        mean, a_cache = self.actor.forward_cache(x)
        v, v_cache = self.critic.forward_cache(x)
        features = a_cache[-1][0]
        logp = self._logprob(mean, features, u)
        ratio = np.exp(logp - old_logp)
        clipped = np.clip(ratio, 1.0 - hp.clip_range, 1.0 + hp.clip_range)
        unclipped_active = advantages * ratio <= advantages * clipped
        self.last_clip_fraction = float(np.mean(np.abs(ratio - 1.0) > hp.clip_range))
        g_logp = -advantages * ratio * unclipped_active / b
        value_err = v[:, 0] - returns
        loss = (-np.mean(np.minimum(advantages * ratio, advantages * clipped))
                + hp.vf_coef * np.mean(value_err * value_err))
        if not np.isfinite(loss):
            raise DivergenceError(f"ppo: non-finite loss after {self.updates} updates")
        if hp.use_sde:
            g_mean, g_log_std = nn.gsde_grads(u, mean, features, self.log_std, g_logp)
            var = nn.gsde_variance(features, self.log_std)
            # entropy term: -ent_coef * mean(sum 0.5 * log(2 pi e var))
            g_var = np.full_like(var, -hp.ent_coef * 0.5 / b) / var
            g_log_std = g_log_std + 2.0 * np.exp(2.0 * self.log_std) * ((features * features).T @ g_var)
        else:
            inv_var = np.exp(-2.0 * self.log_std)
            d = u - mean
            g_mean = g_logp[:, None] * d * inv_var
            g_log_std = (g_logp[:, None] * (d * d * inv_var - 1.0)).sum(axis=0) - hp.ent_coef
        g_actor, _ = self.actor.backward(a_cache, g_mean, need_input_grad=False)
        g_critic, _ = self.critic.backward(v_cache, (2.0 * hp.vf_coef * value_err / b)[:, None],
                                           need_input_grad=False)
        grads, _ = nn.clip_by_global_norm(g_actor + g_critic + [g_log_std], hp.max_grad_norm)
        nn.adam_step(self.opt, self._params(), grads)
        self.updates += 1

    def check(self):
        nn.check_finite(self.actor, self.critic)
        nn.check_finite([self.log_std], what="ppo log-std")


def ppo_train(env: BanditEnv, hp: PPOParams | None = None, episodes: int = 500_000, seed: int = 0,
              eval_every: int = EVAL_EVERY, eval_episodes: int = EVAL_EPISODES,
              report: ReportFn | None = None) -> TrainResult:
    hp = PPOParams() if hp is None else hp
    if episodes < 1:
        raise InvalidInputError("episodes must be >= 1")
    agent = PPOAgent(env, hp, seed)
    explore_rng = np.random.default_rng([seed, 1])
    batch_rng = np.random.default_rng([seed, 2])
    stream = EpisodeStream(env, seed)
    schedule = Schedule(env, eval_every, eval_episodes, report)
    schedule.curve.metadata["gae_lambda"] = "inert: one-step episodes make the advantage r - V(c)"
    stopped = schedule.evaluate(0, agent.policy())
    done = 0
    while done < episodes and not stopped:
        n = min(int(hp.n_steps), episodes - done)
        batch = stream.get(done, n)
        x, u, logp, values = agent.collect(env.observe(batch), explore_rng)
        rewards, _ = env.evaluate(batch, np.clip(u, -1.0, 1.0))
        advantages = rewards - values
        for _ in range(int(hp.n_epochs)):
            order = batch_rng.permutation(n)
            for k in range(0, n, int(hp.batch_size)):
                idx = order[k:k + int(hp.batch_size)]
                agent.update(x[idx], u[idx], logp[idx], rewards[idx], advantages[idx])
        done += n
        if schedule.due(done, episodes):
            agent.check()
            stopped = schedule.evaluate(done, agent.policy())
    return TrainResult(agent.policy(copy=True), schedule.curve, agent, stopped_early=stopped)
