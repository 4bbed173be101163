"""Twin Delayed DDPG specialised to one-step episodes.

Every episode is terminal, so both critics regress straight onto the observed
reward and the target networks never enter a loss.  They are still tracked
with Polyak averaging so the update matches the full algorithm step for step.
"""
from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import DivergenceError
from .common import (EVAL_EPISODES, EVAL_EVERY, BanditEnv, LearnedPolicy, OrnsteinUhlenbeck, ReportFn,
                     TrainResult, env_digest, normalize_obs, run_off_policy)
from .hyperparams import TD3Params


def _critic(obs_dim, action_dim, arch, rng):
    sizes = (obs_dim + action_dim, *arch, 1)
    return nn.Mlp.create(sizes, ("relu",) * len(arch) + ("identity",), rng)


class TD3Agent:
    def __init__(self, env: BanditEnv, hp: TD3Params, seed: int):
        rng = np.random.default_rng([seed, 0])
        self.env, self.hp, self.seed = env, hp, seed
        arch = tuple(hp.net_arch)
        self.actor = nn.Mlp.create((env.obs_dim, *arch, env.action_dim), ("relu",) * len(arch) + ("tanh",), rng)
        self.critics = [_critic(env.obs_dim, env.action_dim, arch, rng) for _ in range(2)]
        self.actor_target = self.actor.copy()
        self.critic_targets = [c.copy() for c in self.critics]
        self.actor_opt = nn.AdamState.like(self.actor.params, hp.learning_rate)
        self.critic_opt = nn.AdamState.like(self.critics[0].params + self.critics[1].params, hp.learning_rate)
        self.updates = 0
        self.noise = None
        if hp.noise_type == "ornstein-uhlenbeck":
            self.noise = OrnsteinUhlenbeck(hp.noise_std, env.action_dim)
        self.last_critic_loss = float("nan")

    def normalize(self, obs):
        return normalize_obs(obs, self.env.obs_low, self.env.obs_high)

    def policy(self, copy: bool = False) -> LearnedPolicy:
        actor = self.actor.copy() if copy else self.actor
        return LearnedPolicy("td3", actor, self.env.obs_low.copy(), self.env.obs_high.copy(), self.hp,
                             seed=self.seed, env_digest=env_digest(self.env))

    def explore(self, obs, rng) -> np.ndarray:
        mean = self.actor.forward(self.normalize(obs))
        if self.hp.noise_type is None:
            return mean
        if self.hp.noise_type == "normal":
            noise = self.hp.noise_std * rng.standard_normal(mean.shape)
        else:
            noise = np.empty_like(mean)
            for i in range(len(mean)):
                self.noise.reset()
                noise[i] = self.noise(rng)
        return np.clip(mean + noise, -1.0, 1.0)

    def update(self, obs, actions, rewards):
        b = len(rewards)
        x = np.concatenate([obs, actions], axis=1)
        grads, loss = [], 0.0
        for critic in self.critics:
            q, cache = critic.forward_cache(x)
            err = q[:, 0] - rewards
            loss += float(np.mean(err * err))
            g, _ = critic.backward(cache, (2.0 * err / b)[:, None], need_input_grad=False)
            grads += g
        if not np.isfinite(loss):
            raise DivergenceError(f"td3: non-finite critic loss after {self.updates} updates")
        self.last_critic_loss = loss
        nn.adam_step(self.critic_opt, self.critics[0].params + self.critics[1].params, grads)
        self.updates += 1
        if self.updates % self.hp.policy_delay == 0:
            a, a_cache = self.actor.forward_cache(obs)
            q, q_cache = self.critics[0].forward_cache(np.concatenate([obs, a], axis=1))
            _, dx = self.critics[0].backward(q_cache, np.full_like(q, -1.0 / b), need_param_grads=False)
            g, _ = self.actor.backward(a_cache, dx[:, obs.shape[1]:], need_input_grad=False)
            nn.adam_step(self.actor_opt, self.actor.params, g)
            for target, source in zip(self.critic_targets, self.critics):
                nn.polyak_update(target, source, self.hp.tau)
            nn.polyak_update(self.actor_target, self.actor, self.hp.tau)

    def check(self):
        nn.check_finite(self.actor, *self.critics)


def td3_train(env: BanditEnv, hp: TD3Params | None = None, episodes: int = 500_000, seed: int = 0,
              eval_every: int = EVAL_EVERY, eval_episodes: int = EVAL_EPISODES,
              report: ReportFn | None = None) -> TrainResult:
    hp = TD3Params() if hp is None else hp
    agent = TD3Agent(env, hp, seed)
    return run_off_policy(agent, env, hp, episodes, seed, eval_every, eval_episodes, report)
