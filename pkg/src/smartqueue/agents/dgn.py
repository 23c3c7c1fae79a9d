"""Graph-convolutional Q-learning (DGN) with parameters shared by all agents.

Network: encoder ``6 -> 128 -> 128`` (relu), ``conv_layers`` masked attention
convolutions, and a linear Q head on the concatenation of the encoder output
and every convolution output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import N_ACTIONS
from ..errors import DimensionError, PreconditionError
from ..nn import (
    AttentionConfig,
    ParamSet,
    Tape,
    attention_conv,
    concat,
    init_attention,
    init_dense,
    init_mlp,
    linear,
    make_optimizer,
    mlp_forward,
    soft_update,
)
from .replay import Batch


@dataclass
class DgnConfig:
    obs_dim: int = 6
    hidden: int = 128
    conv_layers: int = 2
    heads: int = 8
    n_actions: int = N_ACTIONS
    gamma: float = 0.99
    tau: float = 0.01
    batch_size: int = 32
    lr: float = 1e-3
    optimizer: str = "adam"
    epsilon: float = 0.1

    def __post_init__(self):
        if self.conv_layers not in (1, 2):
            raise PreconditionError(f"conv_layers must be 1 or 2, got {self.conv_layers}")

    @property
    def attention(self) -> AttentionConfig:
        return AttentionConfig(self.heads, self.hidden, self.hidden // self.heads)


def init_dgn(cfg: DgnConfig, rng: np.random.Generator) -> ParamSet:
    p = ParamSet()
    init_mlp(p, "enc", [cfg.obs_dim, cfg.hidden, cfg.hidden], rng)
    for k in range(cfg.conv_layers):
        init_attention(p, f"conv{k}", cfg.attention, rng)
    init_dense(p, "q", cfg.hidden * (cfg.conv_layers + 1), cfg.n_actions, rng)
    return p


def conv_layer_count(params: ParamSet) -> int:
    k = 0
    while f"conv{k}.Wq" in params:
        k += 1
    return k


def dgn_forward(
    obs: np.ndarray,
    mask: np.ndarray,
    params: ParamSet,
    cfg: AttentionConfig | None = None,
    tape: Tape | None = None,
) -> np.ndarray:
    """Q-values ``(..., N, 8)`` for observations ``(..., N, 6)``.

    ``mask`` is ``(..., N, N)`` (or one ``N x N`` mask shared by the batch)
    and must be reflexive.
    """
    obs = np.asarray(obs, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    n = obs.shape[-2]
    if mask.shape[-2:] != (n, n):
        raise DimensionError(f"mask shape {mask.shape} does not match {n} agents")
    if mask.ndim < obs.ndim:
        mask = np.broadcast_to(mask, obs.shape[:-2] + (n, n))
    if cfg is None:
        hidden = params["enc.1.W"].shape[1]
        cfg = AttentionConfig(8, hidden, hidden // 8)
    f = mlp_forward(obs, params, "relu", tape, prefix="enc")
    feats = [f]
    for k in range(conv_layer_count(params)):
        f = attention_conv(f, mask, cfg, params, f"conv{k}", tape)
        feats.append(f)
    return linear(concat(feats, tape), params, "q", tape)


def dgn_targets(batch: Batch, target: ParamSet, gamma: float, cfg: AttentionConfig | None = None) -> np.ndarray:
    """``y = r`` where done, else ``r + gamma * max_a' Q_target(O', a')``."""
    q_next = dgn_forward(batch.next_obs, batch.mask, target, cfg)
    boot = gamma * q_next.max(axis=-1)
    return batch.rewards + np.where(batch.done, 0.0, boot)


def dgn_loss(batch: Batch, main: ParamSet, target: ParamSet, gamma: float, cfg=None, tape=None):
    """Mean over batch and agents of ``(y - Q(O, a))^2``; returns ``(loss, dL/dQ)``."""
    if len(batch) == 0:
        raise PreconditionError("empty batch")
    y = dgn_targets(batch, target, gamma, cfg)
    q = dgn_forward(batch.obs, batch.mask, main, cfg, tape)
    S, N = batch.actions.shape
    qa = np.take_along_axis(q, batch.actions[..., None], axis=-1)[..., 0]
    err = qa - y
    loss = float(np.mean(err**2))
    dq = np.zeros_like(q)
    np.put_along_axis(dq, batch.actions[..., None], (2.0 / (S * N) * err)[..., None], axis=-1)
    return loss, dq


def dgn_train_step(batch: Batch, gamma: float, main: ParamSet, target: ParamSet, optimizer, tau: float = 0.01, cfg=None) -> float:
    """One gradient step on the shared parameters, then a soft target update.

    Returns the loss measured before the step.
    """
    tape = Tape()
    loss, dq = dgn_loss(batch, main, target, gamma, cfg, tape)
    grads = tape.backward(dq)
    optimizer.step(main, grads)
    soft_update(target, main, tau)
    return loss


class DgnAgent:
    """Main and target DGN networks with their optimiser."""

    kind = "dgn"

    def __init__(self, n_agents: int, cfg: DgnConfig | None = None, seed: int = 0):
        self.cfg = cfg or DgnConfig()
        self.n_agents = n_agents
        self.main = init_dgn(self.cfg, np.random.default_rng(seed))
        self.target = self.main.copy()
        self.optimizer = make_optimizer(self.cfg.optimizer, self.cfg.lr)
        self.train_steps = 0

    def q_values(self, obs: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return dgn_forward(obs, mask, self.main, self.cfg.attention)

    def train_on(self, batch: Batch) -> float:
        self.train_steps += 1
        return dgn_train_step(batch, self.cfg.gamma, self.main, self.target, self.optimizer, self.cfg.tau, self.cfg.attention)

    def state(self) -> ParamSet:
        return self.main

    def load_state(self, params: ParamSet) -> None:
        self.main.check_compatible(params)
        self.main = params.copy()
        self.target = params.copy()
