"""Uniform policy wrappers used by the training loop and the campaign harness."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, PreconditionError
from ..nn import ParamSet
from .dgn import DgnAgent, DgnConfig
from .dqn import CentralizedDqn, DistributedDqn, DqnConfig
from .replay import Experience, ReplayBuffer

POLICIES = ("dgn", "madqn-dist", "madqn-central", "pq")


def select_action(q_row, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over one row of Q-values.

    Explores with probability ``epsilon``; otherwise takes the argmax, breaking
    ties towards the lowest action index.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise PreconditionError(f"epsilon must lie in [0, 1], got {epsilon}")
    q_row = np.asarray(q_row)
    if rng.random() < epsilon:
        return int(rng.integers(len(q_row)))
    return int(np.argmax(q_row))


def epsilon_schedule(step: int, mode: str, eps0: float = 0.1, decay: float = 0.99955, floor: float = 0.001) -> float:
    """DGN keeps ``eps0``; MADQN decays geometrically from 1 to ``floor``."""
    if step < 0:
        raise PreconditionError("step must be >= 0")
    if mode == "dgn":
        return eps0
    if mode == "madqn":
        return max(floor, decay**step)
    raise ValueError(f"unknown epsilon mode {mode!r}")


def centralized_step(agent: CentralizedDqn, global_obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Joint action: an independent epsilon-greedy choice on every head."""
    q = agent.q_values(global_obs)
    return np.array([select_action(row, epsilon, rng) for row in q], dtype=np.int64)


class Policy:
    """What the training loop and harness need from a policy."""

    name = "base"
    trainable = True
    scheduler = "wfq"

    def __init__(self, n_agents: int, *, seed: int = 0, buffer_size: int = 20000, strict: bool = False):
        self.n_agents = n_agents
        self.strict = strict
        self.buffer = ReplayBuffer(buffer_size, np.random.default_rng([seed, 1]))

    def epsilon(self, step: int) -> float:
        raise NotImplementedError

    def act(self, features: np.ndarray, mask: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def remember(self, exp: Experience) -> None:
        self.buffer.add(exp)

    def learn(self) -> float | None:
        """One training iteration; ``None`` while there is too little eligible data."""
        raise NotImplementedError

    def state(self) -> ParamSet:
        raise NotImplementedError

    def load_state(self, params: ParamSet) -> None:
        raise NotImplementedError


class DgnPolicy(Policy):
    name = "dgn"

    def __init__(self, n_agents, cfg: DgnConfig | None = None, *, seed=0, buffer_size=20000, strict=False):
        super().__init__(n_agents, seed=seed, buffer_size=buffer_size, strict=strict)
        self.agent = DgnAgent(n_agents, cfg, seed)
        self.cfg = self.agent.cfg

    def epsilon(self, step):
        return epsilon_schedule(step, "dgn", self.cfg.epsilon)

    def act(self, features, mask, epsilon, rng):
        q = self.agent.q_values(features, mask)
        return np.array([select_action(row, epsilon, rng) for row in q], dtype=np.int64)

    def _keep(self):
        # literal reading: only transitions where every agent was rewarded
        return (lambda e: bool(np.all(e.rewards > 0))) if self.strict else None

    def learn(self):
        keep = self._keep()
        if len(self.buffer.eligible(keep)) < self.cfg.batch_size:
            return None
        return self.agent.train_on(self.buffer.sample(self.cfg.batch_size, keep))

    def state(self):
        return self.agent.state()

    def load_state(self, params):
        self.agent.load_state(params)


class DistributedDqnPolicy(Policy):
    name = "madqn-dist"

    def __init__(self, n_agents, cfg: DqnConfig | None = None, *, seed=0, buffer_size=20000, strict=False):
        super().__init__(n_agents, seed=seed, buffer_size=buffer_size, strict=strict)
        self.agent = DistributedDqn(n_agents, cfg, seed)
        self.cfg = self.agent.cfg

    def epsilon(self, step):
        return epsilon_schedule(step, "madqn", decay=self.cfg.eps_decay, floor=self.cfg.eps_floor)

    def act(self, features, mask, epsilon, rng):
        q = self.agent.q_values(features)
        return np.array([select_action(row, epsilon, rng) for row in q], dtype=np.int64)

    def learn(self):
        losses = []
        S = self.cfg.batch_size
        for i in range(self.n_agents):
            keep = (lambda e, i=i: bool(e.done[i])) if self.strict else None
            if len(self.buffer.eligible(keep)) < S:
                continue
            losses.append(self.agent.train_agent(i, self.buffer.sample(S, keep)))
        return float(np.mean(losses)) if losses else None

    def state(self):
        return self.agent.state()

    def load_state(self, params):
        self.agent.load_state(params)


class CentralizedDqnPolicy(Policy):
    name = "madqn-central"

    def __init__(self, n_agents, cfg: DqnConfig | None = None, *, seed=0, buffer_size=20000, strict=False):
        super().__init__(n_agents, seed=seed, buffer_size=buffer_size, strict=strict)
        self.agent = CentralizedDqn(n_agents, cfg, seed)
        self.cfg = self.agent.cfg

    def epsilon(self, step):
        return epsilon_schedule(step, "madqn", decay=self.cfg.eps_decay, floor=self.cfg.eps_floor)

    def act(self, features, mask, epsilon, rng):
        return centralized_step(self.agent, features, epsilon, rng)

    def learn(self):
        keep = (lambda e: bool(np.all(e.done))) if self.strict else None
        if len(self.buffer.eligible(keep)) < self.cfg.batch_size:
            return None
        return self.agent.train_on(self.buffer.sample(self.cfg.batch_size, keep))

    def state(self):
        return self.agent.state()

    def load_state(self, params):
        self.agent.load_state(params)


class PqPolicy(Policy):
    """Strict priority on every port; never touches the weights."""

    name = "pq"
    trainable = False
    scheduler = "pq"

    def epsilon(self, step):
        return 0.0

    def act(self, features, mask, epsilon, rng):
        return np.zeros(self.n_agents, dtype=np.int64)

    def remember(self, exp):
        pass

    def learn(self):
        return None

    def state(self):
        return ParamSet()

    def load_state(self, params):
        if len(params):
            raise ConfigError("the PQ baseline has no parameters")


def make_policy(name: str, n_agents: int, *, seed: int = 0, conv_layers: int = 2, strict: bool = False,
                lr: float | None = None, buffer_size: int = 20000, epsilon: float | None = None) -> Policy:
    if name == "dgn":
        cfg = DgnConfig(conv_layers=conv_layers)
        if lr is not None:
            cfg.lr = lr
        if epsilon is not None:
            cfg.epsilon = epsilon
        return DgnPolicy(n_agents, cfg, seed=seed, buffer_size=buffer_size, strict=strict)
    if name in ("madqn-dist", "madqn-central"):
        cfg = DqnConfig()
        if lr is not None:
            cfg.lr = lr
        cls = DistributedDqnPolicy if name == "madqn-dist" else CentralizedDqnPolicy
        return cls(n_agents, cfg, seed=seed, buffer_size=buffer_size, strict=strict)
    if name == "pq":
        return PqPolicy(n_agents, seed=seed)
    raise ConfigError(f"unknown policy {name!r}; choose from {', '.join(POLICIES)}")

