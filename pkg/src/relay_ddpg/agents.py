"""Actor-critic (DDPG), discrete DQN and random agents for relay/power control.

The DDPG actor emits K relay scores in (-1, 1) followed by a source-power
fraction in (0, 1).  The environment executes the argmax relay; the critic
sees the raw continuous vector so the policy gradient flows through every
component.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import ActionCommand
from .nn import Mlp, NonFiniteError, RmsProp, clip_by_global_norm, dense_specs, sigmoid, soft_update
from .replay import SampledBatch


@dataclass
class TrainStepReport:
    critic_loss: float
    mean_abs_td: float
    actor_objective: float
    td_errors: np.ndarray


def decode_action(raw, n_relays: int, max_power: float) -> ActionCommand:
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (n_relays + 1,):
        raise ValueError(f"raw action must have length {n_relays + 1}")
    relay = int(np.argmax(raw[:n_relays])) + 1  # argmax returns the first maximum
    frac = min(max(float(raw[n_relays]), 0.0), 1.0)
    return ActionCommand(relay, frac * max_power, max_power)


def random_raw_action(n_relays: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform scores in [-1, 1] plus a uniform power fraction: decodes to a uniform relay and power."""
    return np.concatenate([rng.uniform(-1.0, 1.0, n_relays), rng.uniform(0.0, 1.0, 1)])


def random_act(n_relays: int, max_power: float, rng: np.random.Generator) -> ActionCommand:
    relay = int(rng.integers(1, n_relays + 1))
    return ActionCommand(relay, float(rng.uniform(0.0, max_power)), max_power)


class DdpgAgent:
    kind = "ddpg"

    def __init__(self, state_dim: int, n_relays: int, max_power: float, rng: np.random.Generator,
                 hidden=(128, 128), lr_actor=0.001, lr_critic=0.005, gamma=0.99, tau=0.001,
                 noise_scale=0.3, noise_decay=0.995, noise_floor=0.01,
                 rms_decay=0.9, rms_eps=1e-8, grad_clip=1.0):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        self.state_dim = state_dim
        self.n_relays = n_relays
        self.max_power = max_power
        self.action_dim = n_relays + 1
        self.gamma = gamma
        self.tau = tau
        self.noise_scale = noise_scale
        self.noise_decay = noise_decay
        self.noise_floor = noise_floor
        self.grad_clip = grad_clip
        hidden = tuple(hidden)
        self.actor = Mlp.init(dense_specs((state_dim, *hidden, self.action_dim)), rng)
        self.critic = Mlp.init(dense_specs((state_dim + self.action_dim, *hidden, 1)), rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = RmsProp(lr_actor, rms_decay, rms_eps)
        self.critic_opt = RmsProp(lr_critic, rms_decay, rms_eps)

    # output squashing: tanh on relay scores, sigmoid on the power fraction
    def _squash(self, z):
        out = np.empty_like(z)
        out[..., :-1] = np.tanh(z[..., :-1])
        out[..., -1] = sigmoid(z[..., -1])
        return out

    @staticmethod
    def _squash_grad(a):
        d = np.empty_like(a)
        d[..., :-1] = 1.0 - a[..., :-1] ** 2
        d[..., -1] = a[..., -1] * (1.0 - a[..., -1])
        return d

    def policy(self, states, target: bool = False) -> np.ndarray:
        net = self.actor_target if target else self.actor
        return self._squash(net(states))

    def clamp(self, raw):
        raw = np.array(raw, dtype=float)
        raw[..., :-1] = np.clip(raw[..., :-1], -1.0, 1.0)
        raw[..., -1] = np.clip(raw[..., -1], 0.0, 1.0)
        return raw

    def act(self, features, explore: bool = False, rng: np.random.Generator | None = None):
        raw = self.policy(features)
        if explore and self.noise_scale > 0:
            raw = self.clamp(raw + self.noise_scale * rng.standard_normal(raw.shape))
        return raw, decode_action(raw, self.n_relays, self.max_power)

    def end_episode(self) -> None:
        self.noise_scale = max(self.noise_floor, self.noise_scale * self.noise_decay)

    def q_values(self, states, actions, target: bool = False) -> np.ndarray:
        net = self.critic_target if target else self.critic
        return net(np.concatenate([states, actions], axis=1))[:, 0]

    def critic_gradients(self, batch: SampledBatch):
        """Gradient of mean(w * td^2) against the target networks; returns (grads, td, loss)."""
        n = len(batch)
        s, a, w = batch.states, batch.actions, batch.weights
        y = batch.rewards + self.gamma * self.q_values(batch.next_states,
                                                       self.policy(batch.next_states, target=True),
                                                       target=True)
        q, cache = self.critic.forward(np.concatenate([s, a], axis=1))
        td = y - q[:, 0]
        loss = float(np.mean(w * td * td))
        if not np.isfinite(loss):
            raise NonFiniteError("non-finite critic loss")
        return self.critic.backward(cache, (-2.0 * w * td / n)[:, None]), td, loss

    def actor_gradients(self, states):
        """Descent direction for -mean Q(s, mu(s)); returns (grads, objective)."""
        n = len(states)
        z, actor_cache = self.actor.forward(states)
        mu = self._squash(z)
        qa, qcache = self.critic.forward(np.concatenate([states, mu], axis=1))
        dq = self.critic.backward(qcache, np.full((n, 1), 1.0 / n)).inputs[:, self.state_dim:]
        grads = self.actor.backward(actor_cache, -dq * self._squash_grad(mu))
        grads.inputs = None
        return grads, float(np.mean(qa))

    def train_step(self, batch: SampledBatch) -> TrainStepReport:
        grads, td, loss = self.critic_gradients(batch)
        clip_by_global_norm(grads, self.grad_clip)
        self.critic_opt.step(self.critic, grads)

        agrads, objective = self.actor_gradients(batch.states)
        clip_by_global_norm(agrads, self.grad_clip)
        self.actor_opt.step(self.actor, agrads)

        soft_update(self.critic_target, self.critic, self.tau)
        soft_update(self.actor_target, self.actor, self.tau)
        return TrainStepReport(loss, float(np.mean(np.abs(td))), objective, td)

    def networks(self) -> dict:
        return {"actor": self.actor, "critic": self.critic,
                "actor_target": self.actor_target, "critic_target": self.critic_target}

    def optimizers(self) -> dict:
        return {"actor": self.actor_opt, "critic": self.critic_opt}


class DqnAgent:
    """Deep Q-network over K*L joint (relay, power level) actions.

    Action index ``i`` decodes to relay ``i // L + 1`` and source power
    ``(i % L + 1) / L * P_max``.
    """

    kind = "dqn"

    def __init__(self, state_dim: int, n_relays: int, max_power: float, rng: np.random.Generator,
                 power_levels=10, hidden=(128, 128), lr=0.005, gamma=0.99, tau=0.001,
                 eps_start=1.0, eps_end=0.05, eps_episodes=30,
                 rms_decay=0.9, rms_eps=1e-8, grad_clip=1.0):
        self.state_dim = state_dim
        self.n_relays = n_relays
        self.max_power = max_power
        self.power_levels = power_levels
        self.n_actions = n_relays * power_levels
        self.action_dim = 1
        self.gamma = gamma
        self.tau = tau
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_episodes = eps_episodes
        self.exploration_rate = eps_start
        self.episode = 0
        self.grad_clip = grad_clip
        self.q_net = Mlp.init(dense_specs((state_dim, *tuple(hidden), self.n_actions)), rng)
        self.q_target = self.q_net.copy()
        self.opt = RmsProp(lr, rms_decay, rms_eps)

    def decode(self, index: int) -> ActionCommand:
        if not 0 <= index < self.n_actions:
            raise ValueError(f"action index {index} outside 0..{self.n_actions - 1}")
        relay, level = divmod(int(index), self.power_levels)
        return ActionCommand(relay + 1, (level + 1) / self.power_levels * self.max_power, self.max_power)

    def power_options(self) -> np.ndarray:
        return np.arange(1, self.power_levels + 1) / self.power_levels * self.max_power

    def act(self, features, explore: bool = False, rng: np.random.Generator | None = None):
        if explore and rng.random() < self.exploration_rate:
            index = int(rng.integers(self.n_actions))
        else:
            index = int(np.argmax(self.q_net(features)))
        return np.array([float(index)]), self.decode(index)

    def end_episode(self) -> None:
        self.episode += 1
        frac = min(1.0, self.episode / self.eps_episodes) if self.eps_episodes > 0 else 1.0
        self.exploration_rate = self.eps_start + frac * (self.eps_end - self.eps_start)

    def train_step(self, batch: SampledBatch) -> TrainStepReport:
        n = len(batch)
        idx = batch.actions[:, 0].astype(np.int64)
        y = batch.rewards + self.gamma * self.q_target(batch.next_states).max(axis=1)
        q, cache = self.q_net.forward(batch.states)
        td = y - q[np.arange(n), idx]
        loss = float(np.mean(batch.weights * td * td))
        if not np.isfinite(loss):
            raise NonFiniteError("non-finite DQN loss")
        g = np.zeros_like(q)
        g[np.arange(n), idx] = -2.0 * batch.weights * td / n
        grads = self.q_net.backward(cache, g)
        clip_by_global_norm(grads, self.grad_clip)
        self.opt.step(self.q_net, grads)
        soft_update(self.q_target, self.q_net, self.tau)
        return TrainStepReport(loss, float(np.mean(np.abs(td))), float(np.mean(q.max(axis=1))), td)

    def networks(self) -> dict:
        return {"q_net": self.q_net, "q_target": self.q_target}

    def optimizers(self) -> dict:
        return {"q_net": self.opt}


class RandomAgent:
    kind = "random"
    action_dim = 1

    def __init__(self, n_relays: int, max_power: float):
        self.n_relays = n_relays
        self.max_power = max_power

    def act(self, features, explore: bool = False, rng: np.random.Generator | None = None):
        cmd = random_act(self.n_relays, self.max_power, rng)
        return np.array([float(cmd.relay)]), cmd

    def end_episode(self) -> None:
        pass

    def networks(self) -> dict:
        return {}

    def optimizers(self) -> dict:
        return {}
