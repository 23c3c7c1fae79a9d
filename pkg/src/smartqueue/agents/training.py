"""The interaction/training loop shared by every learning policy."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from ..env import QueueingEnv
from ..errors import ConfigError, DivergenceError
from .policies import Policy
from .replay import Experience


REWARDS = ("regret", "raw")
BOOTSTRAPS = ("always", "cutoff")


@dataclass
class TrainConfig:
    """Training budget and the learning signal stored in replay.

    ``reward="raw"`` stores the SLA reward as the environment returns it;
    ``"regret"`` stores it minus the best reward attainable that snapshot, so
    every transition scores at most 0. ``bootstrap="cutoff"`` stores the
    environment's done flags, which stop bootstrapping at the best reward;
    ``"always"`` stores them all as False. Strict policies need raw/cutoff.
    """

    steps: int = 3000
    episode_len: int = 60
    warmup: int = 200
    train_iters: int = 1
    seed: int = 0
    reward: str = "regret"
    bootstrap: str = "always"

    def __post_init__(self):
        if self.reward not in REWARDS:
            raise ConfigError(f"reward must be one of {REWARDS}, got {self.reward!r}")
        if self.bootstrap not in BOOTSTRAPS:
            raise ConfigError(f"bootstrap must be one of {BOOTSTRAPS}, got {self.bootstrap!r}")

    @classmethod
    def literal(cls, **kw) -> "TrainConfig":
        return cls(reward="raw", bootstrap="cutoff", **kw)

    def learning_signal(self, rewards: np.ndarray, dones: np.ndarray, best) -> tuple[np.ndarray, np.ndarray]:
        r = rewards - np.asarray(best, dtype=np.float64) if self.reward == "regret" else rewards
        d = np.zeros_like(dones) if self.bootstrap == "always" else dones
        return r, d


@dataclass
class TrainResult:
    losses: list[float | None] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)
    mean_rewards: list[float] = field(default_factory=list)
    done_rate: list[float] = field(default_factory=list)

    def loss_curve(self) -> np.ndarray:
        """Losses of the steps that trained, in order."""
        return np.array([l for l in self.losses if l is not None])


def train(env: QueueingEnv, policy: Policy, cfg: TrainConfig, log: IO[str] | None = None) -> TrainResult:
    """Collect experience snapshot by snapshot and train after ``warmup`` steps.

    Every ``episode_len`` steps the weights are re-drawn at random while the
    traffic keeps flowing. Exploration follows ``policy.epsilon(episode)``.
    Raises :class:`DivergenceError` on a non-finite loss.
    """
    if policy.strict and (cfg.reward, cfg.bootstrap) != ("raw", "cutoff"):
        raise ConfigError("the strict data filter is defined on raw rewards with the done cutoff")
    rng = np.random.default_rng([cfg.seed, 2])
    res = TrainResult()
    feats = env.features(env.reset())
    episode = 0
    for step in range(cfg.steps):
        eps = policy.epsilon(episode)
        actions = policy.act(feats, env.mask, eps, rng)
        obs2, rewards, dones, info = env.step(actions)
        feats2 = env.features(obs2)
        r_learn, d_learn = cfg.learning_signal(rewards, dones, info.best)
        policy.remember(Experience(feats, actions, feats2, r_learn, env.adjacency, env.mask, d_learn))
        loss = None
        if step + 1 >= cfg.warmup:
            for _ in range(cfg.train_iters):
                l = policy.learn()
                if l is not None:
                    loss = l if loss is None else loss + l
            if loss is not None:
                loss /= cfg.train_iters
                if not math.isfinite(loss):
                    raise DivergenceError(f"loss became {loss} at step {step}")
        res.losses.append(loss)
        res.epsilons.append(eps)
        res.mean_rewards.append(float(np.mean(rewards)))
        res.done_rate.append(float(np.mean(dones)))
        if log is not None:
            rec = {"step": step, "loss": loss, "epsilon": eps, "mean_reward": round(float(np.mean(rewards)), 10)}
            log.write(json.dumps(rec) + "\n")
        if (step + 1) % cfg.episode_len == 0:
            episode += 1
            feats2 = env.features(env.reset())
        feats = feats2
    if policy.trainable and not policy.state().all_finite():
        raise DivergenceError("parameters became non-finite")
    return res
