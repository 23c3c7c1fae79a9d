"""Multi-agent DQN baselines.

Distributed: every agent owns a ``6 -> 128 -> 128 -> 8`` network and learns
from its own observation and reward. Centralized: one network reads the
concatenated observations of all N agents and has N heads of 8 Q-values on a
shared trunk, trained on the summed reward (a factorised stand-in for the
intractable ``8^N`` joint action space).

Both use a target network copied from the main one every ``sync_every``
training steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import N_ACTIONS
from ..errors import DimensionError, PreconditionError
from ..nn import ParamSet, Tape, init_mlp, make_optimizer, mlp_forward


@dataclass
class DqnConfig:
    obs_dim: int = 6
    hidden: int = 128
    n_actions: int = N_ACTIONS
    gamma: float = 0.99
    batch_size: int = 32
    lr: float = 1e-3
    optimizer: str = "adam"
    sync_every: int = 100
    eps_decay: float = 0.99955
    eps_floor: float = 0.001


def init_dqn(prefix: str, in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator) -> ParamSet:
    p = ParamSet()
    init_mlp(p, prefix, [in_dim, hidden, hidden, out_dim], rng)
    return p


def dqn_forward(x: np.ndarray, params: ParamSet, prefix: str, heads: int = 1, tape: Tape | None = None) -> np.ndarray:
    """Q-values ``(..., heads, 8)`` from inputs ``(..., in_dim)``."""
    q = mlp_forward(x, params, "relu", tape, prefix=prefix, output_activation="identity")
    if q.shape[-1] % heads:
        raise DimensionError(f"output width {q.shape[-1]} is not a multiple of {heads} heads")
    return q.reshape(*q.shape[:-1], heads, q.shape[-1] // heads)


def dqn_loss(x, actions, rewards, next_x, done, gamma, main, target, prefix, heads=1, tape=None):
    """Squared TD error averaged over samples and heads; returns ``(loss, dL/dout)``.

    ``actions`` is ``(S, heads)``; ``rewards`` and ``done`` are ``(S,)`` (shared
    by every head) or ``(S, heads)``.
    """
    x = np.asarray(x, dtype=np.float64)
    S = x.shape[0]
    if S == 0:
        raise PreconditionError("empty batch")
    actions = np.asarray(actions, dtype=np.int64).reshape(S, heads)
    rewards = np.broadcast_to(np.asarray(rewards, dtype=np.float64).reshape(S, -1), (S, heads))
    done = np.broadcast_to(np.asarray(done, dtype=bool).reshape(S, -1), (S, heads))
    q_next = dqn_forward(next_x, target, prefix, heads)
    y = rewards + np.where(done, 0.0, gamma * q_next.max(axis=-1))
    q = dqn_forward(x, main, prefix, heads, tape)
    qa = np.take_along_axis(q, actions[..., None], axis=-1)[..., 0]
    err = qa - y
    loss = float(np.mean(err**2))
    dq = np.zeros_like(q)
    np.put_along_axis(dq, actions[..., None], (2.0 / (S * heads) * err)[..., None], axis=-1)
    return loss, dq.reshape(S, -1)


def dqn_train_step(x, actions, rewards, next_x, done, gamma, main, target, optimizer, prefix, heads=1) -> float:
    """One gradient step on ``main``; the target is left alone (see ``hard_sync``)."""
    tape = Tape()
    loss, dout = dqn_loss(x, actions, rewards, next_x, done, gamma, main, target, prefix, heads, tape)
    optimizer.step(main, tape.backward(dout))
    return loss


def hard_sync(target: ParamSet, main: ParamSet) -> None:
    target.check_compatible(main)
    for k, v in main.items():
        target[k][...] = v


class _Net:
    def __init__(self, prefix, in_dim, out_dim, heads, cfg: DqnConfig, rng):
        self.prefix = prefix
        self.heads = heads
        self.main = init_dqn(prefix, in_dim, cfg.hidden, out_dim, rng)
        self.target = self.main.copy()
        self.optimizer = make_optimizer(cfg.optimizer, cfg.lr)
        self.steps = 0
        self.sync_every = cfg.sync_every

    def train(self, x, a, r, x2, done, gamma) -> float:
        loss = dqn_train_step(x, a, r, x2, done, gamma, self.main, self.target, self.optimizer, self.prefix, self.heads)
        self.steps += 1
        if self.steps % self.sync_every == 0:
            hard_sync(self.target, self.main)
        return loss


class DistributedDqn:
    """Independent learners, one network per agent, no communication."""

    kind = "madqn-dist"

    def __init__(self, n_agents: int, cfg: DqnConfig | None = None, seed: int = 0):
        self.cfg = cfg or DqnConfig()
        self.n_agents = n_agents
        rng = np.random.default_rng(seed)
        self.nets = [_Net(f"a{i}", self.cfg.obs_dim, self.cfg.n_actions, 1, self.cfg, rng) for i in range(n_agents)]

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        """``(N, 8)`` from ``(N, 6)``."""
        return np.stack([dqn_forward(obs[i], n.main, n.prefix)[0] for i, n in enumerate(self.nets)])

    def train_agent(self, i: int, batch) -> float:
        return self.nets[i].train(
            batch.obs[:, i], batch.actions[:, i], batch.rewards[:, i],
            batch.next_obs[:, i], batch.done[:, i], self.cfg.gamma,
        )

    def state(self) -> ParamSet:
        out = ParamSet()
        for n in self.nets:
            out.update(n.main)
        return out

    def load_state(self, params: ParamSet) -> None:
        self.state().check_compatible(params)
        for n in self.nets:
            n.main = params.subset(f"{n.prefix}.").copy()
            n.target = n.main.copy()


class CentralizedDqn:
    """One trunk over the joint observation with one 8-way head per agent."""

    kind = "madqn-central"

    def __init__(self, n_agents: int, cfg: DqnConfig | None = None, seed: int = 0):
        self.cfg = cfg or DqnConfig()
        self.n_agents = n_agents
        rng = np.random.default_rng(seed)
        self.net = _Net("c", self.cfg.obs_dim * n_agents, self.cfg.n_actions * n_agents, n_agents, self.cfg, rng)

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        return dqn_forward(np.asarray(obs).reshape(-1), self.net.main, "c", self.n_agents)

    def train_on(self, batch) -> float:
        S = len(batch)
        return self.net.train(
            batch.obs.reshape(S, -1), batch.actions, batch.rewards.sum(axis=1),
            batch.next_obs.reshape(S, -1), batch.done.all(axis=1), self.cfg.gamma,
        )

    def state(self) -> ParamSet:
        return self.net.main

    def load_state(self, params: ParamSet) -> None:
        self.net.main.check_compatible(params)
        self.net.main = params.copy()
        self.net.target = params.copy()
