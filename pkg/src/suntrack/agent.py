"""Q-learning controller for the solar arm.

A small fully connected network maps the 23-dim observation to one Q-value
per discrete action. Training is the classic recipe: epsilon-greedy
rollouts, a uniform replay buffer, a lagged target network for TD targets,
and squared TD-error minimized by Adam. Everything is seeded, so a training
run is a pure function of (configs, seed).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import environment as env
from .environment import AgentState, N_ACTIONS, ToyConfig
from .neural import (Gradients, Mlp, OptimState, backward_batch, forward,
                     forward_batch, mlp_new, step as optim_step)

MOVE_PENALTY = 0.001
SUCCESS_ERR_RAD = math.radians(5.0)


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters of the Q-learning controller."""

    gamma: float = 0.95
    epsilon_schedule: tuple[float, float, int] = (1.0, 0.05, 10_000)
    buffer_capacity: int = 20_000
    batch_size: int = 64
    target_sync_every: int = 500
    learning_rate: float = 1e-3
    action_delta_rad: float = 0.02
    hidden_sizes: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        eps_start, eps_end, decay_steps = self.epsilon_schedule
        for name, v in (("eps_start", eps_start), ("eps_end", eps_end)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if decay_steps < 1:
            raise ValueError(f"decay_steps must be >= 1, got {decay_steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.buffer_capacity < self.batch_size:
            raise ValueError(
                f"buffer_capacity {self.buffer_capacity} smaller than "
                f"batch_size {self.batch_size}")
        if self.target_sync_every < 1:
            raise ValueError(
                f"target_sync_every must be >= 1, got {self.target_sync_every}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.action_delta_rad <= 0.0:
            raise ValueError(
                f"action_delta_rad must be > 0, got {self.action_delta_rad}")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden_sizes must be positive, got {self.hidden_sizes}")

    def epsilon_at(self, step_index: int) -> float:
        """Linearly annealed exploration rate after step_index env steps."""
        eps_start, eps_end, decay_steps = self.epsilon_schedule
        if step_index >= decay_steps:
            return eps_end
        frac = step_index / decay_steps
        return eps_start + (eps_end - eps_start) * frac


@dataclass(frozen=True)
class Transition:
    """One (s, a, r, s', done) experience."""

    s: AgentState
    a: int
    r: float
    s_next: AgentState
    done: bool

    def __post_init__(self):
        if not 0 <= self.a < N_ACTIONS:
            raise ValueError(f"action {self.a} outside [0, {N_ACTIONS})")
        if not math.isfinite(self.r):
            raise ValueError(f"reward must be finite, got {self.r}")


class ReplayBuffer:
    """Fixed-capacity ring buffer; oldest experiences are evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0
        self.inserted = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._cursor] = t
        self._cursor = (self._cursor + 1) % self.capacity
        self.inserted += 1

    def sample(self, batch_size: int, rng: np.random.Generator
               ) -> list[Transition]:
        """Uniform sample with replacement."""
        if len(self._items) < batch_size:
            raise ValueError(
                f"buffer holds {len(self._items)} < batch_size {batch_size}")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def snapshot(self) -> tuple[Transition, ...]:
        """Current contents, oldest first."""
        if len(self._items) < self.capacity:
            return tuple(self._items)
        return tuple(self._items[self._cursor:] + self._items[:self._cursor])


def select_action(qnet: Mlp, s: AgentState, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy action; greedy ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.uniform() < epsilon:
        return int(rng.integers(N_ACTIONS))
    q = forward(qnet, s.vector())
    return int(np.argmax(q))


def td_targets(batch, target_net: Mlp, gamma: float) -> np.ndarray:
    """Bootstrapped targets y = r + gamma * max_a' Q_target(s', a').

    Terminal transitions cut the bootstrap; only the target network's
    parameters are read.
    """
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    ys = np.empty(len(batch))
    for i, t in enumerate(batch):
        y = t.r
        if not t.done:
            y += gamma * float(np.max(forward(target_net, t.s_next.vector())))
        ys[i] = y
    return ys


def qlearning_gradients(qnet: Mlp, target_net: Mlp, batch, gamma: float
                        ) -> tuple[float, Gradients]:
    """Squared-TD-error loss and its gradient on one batch.

    The gradient flows only through each transition's taken action.
    """
    xs = np.stack([t.s.vector() for t in batch])
    ys = td_targets(batch, target_net, gamma)
    preds = forward_batch(qnet, xs)
    taken = np.array([t.a for t in batch])
    rows = np.arange(len(batch))
    resid = preds[rows, taken] - ys
    loss = float(np.mean(resid ** 2))
    d_out = np.zeros_like(preds)
    d_out[rows, taken] = 2.0 * resid / len(batch)
    return loss, backward_batch(qnet, xs, d_out)


def train_step(qnet: Mlp, target_net: Mlp, opt: OptimState, batch,
               gamma: float) -> tuple[Mlp, OptimState, float]:
    """One optimizer update on a batch; returns the pre-step loss."""
    loss, grads = qlearning_gradients(qnet, target_net, batch, gamma)
    qnet, opt = optim_step(qnet, grads, opt)
    return qnet, opt, loss


def sync_target(qnet: Mlp, target_net: Mlp) -> Mlp:
    """Hard update: the target becomes a bitwise copy of the online net."""
    if qnet.layer_sizes != target_net.layer_sizes:
        raise ValueError(
            f"shape mismatch: {qnet.layer_sizes} vs {target_net.layer_sizes}")
    return qnet.copy()


def _fanout_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _reset_env(env_cfg, seed: int, tracker_net):
    if isinstance(env_cfg, ToyConfig):
        return env.toy_reset(env_cfg, seed)
    return env.reset(env_cfg, seed, tracker_net=tracker_net)


def _step_env(env_cfg, state, action: int, agent_cfg: AgentConfig, tracker_net):
    if isinstance(env_cfg, ToyConfig):
        return env.toy_step(state, action, env_cfg)
    return env.step(state, action, env_cfg,
                    action_delta_rad=agent_cfg.action_delta_rad,
                    tracker_net=tracker_net)


def agent_reward(energy_reward: float, action: int) -> float:
    """Training reward: collected energy minus the tiny movement penalty."""
    return energy_reward - MOVE_PENALTY * (1 if action != 0 else 0)


def observation_size(env_cfg) -> int:
    return 6 + 3 + 1 + N_ACTIONS


def new_qnet(env_cfg, agent_cfg: AgentConfig, seed: int) -> Mlp:
    """Freshly initialized Q-network sized for the environment."""
    sizes = (observation_size(env_cfg), *agent_cfg.hidden_sizes, N_ACTIONS)
    return mlp_new(sizes, seed=seed)


def run_training(env_cfg, agent_cfg: AgentConfig, seed: int,
                 n_episodes: int = 300, tracker_net: Mlp | None = None
                 ) -> tuple[Mlp, list[dict]]:
    """Full Q-learning loop; returns the trained net and per-episode metrics.

    env_cfg may be a ScenarioConfig or a ToyConfig. Metrics rows carry
    episode, return, success, energy_wh, epsilon. Deterministic per seed.
    """
    if n_episodes < 0:
        raise ValueError(f"n_episodes must be >= 0, got {n_episodes}")
    qnet = new_qnet(env_cfg, agent_cfg, _fanout_seed(seed, "qnet-init"))
    if n_episodes == 0:
        return qnet, []
    target_net = qnet.copy()
    opt = OptimState.adam(agent_cfg.learning_rate, qnet)
    buf = ReplayBuffer(agent_cfg.buffer_capacity)
    explore_rng = np.random.default_rng(_fanout_seed(seed, "explore"))
    replay_rng = np.random.default_rng(_fanout_seed(seed, "replay"))
    metrics: list[dict] = []
    env_steps = 0
    train_steps = 0
    for ep in range(n_episodes):
        state, obs = _reset_env(env_cfg, _fanout_seed(seed, f"episode:{ep}"),
                                tracker_net)
        ep_return = 0.0
        ep_energy = 0.0
        err_sum = 0.0
        n_steps = 0
        epsilon = agent_cfg.epsilon_at(env_steps)
        done = False
        while not done:
            epsilon = agent_cfg.epsilon_at(env_steps)
            action = select_action(qnet, obs, epsilon, explore_rng)
            state, result = _step_env(env_cfg, state, action, agent_cfg,
                                      tracker_net)
            r = agent_reward(result.reward, action)
            buf.push(Transition(s=obs, a=action, r=r,
                                s_next=result.observation, done=result.done))
            obs = result.observation
            ep_return += r
            ep_energy += result.reward
            err_sum += result.info.alignment_error_rad
            n_steps += 1
            env_steps += 1
            done = result.done
            if len(buf) >= agent_cfg.batch_size:
                batch = buf.sample(agent_cfg.batch_size, replay_rng)
                qnet, opt, _ = train_step(qnet, target_net, opt, batch,
                                          agent_cfg.gamma)
                train_steps += 1
                if train_steps % agent_cfg.target_sync_every == 0:
                    target_net = sync_target(qnet, target_net)
        success = (err_sum / max(1, n_steps)) < SUCCESS_ERR_RAD
        metrics.append({"episode": ep, "return": ep_return,
                        "success": int(success), "energy_wh": ep_energy,
                        "epsilon": epsilon})
    return qnet, metrics


def run_episode(qnet: Mlp, env_cfg, agent_cfg: AgentConfig, seed: int,
                tracker_net: Mlp | None = None) -> dict:
    """One greedy (epsilon = 0) rollout; returns the same metrics row shape."""
    state, obs = _reset_env(env_cfg, seed, tracker_net)
    rng = np.random.default_rng(0)  # unused at epsilon 0, kept for the contract
    ep_return = 0.0
    ep_energy = 0.0
    err_sum = 0.0
    n_steps = 0
    done = False
    while not done:
        action = select_action(qnet, obs, 0.0, rng)
        state, result = _step_env(env_cfg, state, action, agent_cfg, tracker_net)
        ep_return += agent_reward(result.reward, action)
        ep_energy += result.reward
        err_sum += result.info.alignment_error_rad
        n_steps += 1
        obs = result.observation
        done = result.done
    success = (err_sum / max(1, n_steps)) < SUCCESS_ERR_RAD
    return {"return": ep_return, "success": int(success),
            "energy_wh": ep_energy,
            "mean_error_rad": err_sum / max(1, n_steps)}


def run_evaluation(qnet: Mlp, env_cfg, agent_cfg: AgentConfig,
                   seeds, tracker_net: Mlp | None = None) -> list[dict]:
    """Greedy rollouts over the given seeds, in seed order."""
    return [dict(run_episode(qnet, env_cfg, agent_cfg, s,
                             tracker_net=tracker_net), seed=s)
            for s in seeds]
