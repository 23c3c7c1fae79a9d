"""Multi-agent environment around the simulator.

Each agent owns the WFQ port of one link. Every step it moves the three group
weights by +/- delta, the simulator advances one snapshot, and the agent is
scored on whether the flow groups crossing its port meet their SLAs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import DimensionError, PreconditionError
from .netsim import GROUPS, W_MAX, W_MIN, SnapshotMetrics, Simulator

MBPS = 1e6
DISCRETE_OS_SIZE = 20
N_ACTIONS = 8


@dataclass(frozen=True)
class Thresholds:
    """Per-group SLA targets and reward shaping, in (gold, silver, bronze) order."""

    throughput: tuple[float, float, float] = (30 * MBPS, 10 * MBPS, 5 * MBPS)
    delay: tuple[float, float, float] = (0.15, 0.3, 0.4)
    ratios: tuple[float, float, float] = (3.0, 2.0, 1.0)
    unit: float = 1.0
    kappa: tuple[float, float, float] = (0.8, 0.8, 0.8)
    delta: float = 0.03

    def __post_init__(self):
        t, d = self.throughput, self.delay
        if not t[0] > t[1] > t[2] >= 0:
            raise PreconditionError(f"throughput thresholds must be ordered gold > silver > bronze: {t}")
        if not 0 < d[0] < d[1] < d[2]:
            raise PreconditionError(f"delay thresholds must be ordered gold < silver < bronze: {d}")
        if not all(0 < k <= 1 for k in self.kappa):
            raise PreconditionError(f"kappa must lie in (0, 1]: {self.kappa}")

    def eta(self, g: int) -> float:
        return self.ratios[g] * self.unit

    def phi(self, g: int) -> float:
        return self.kappa[g] * self.eta(g)

    def scaled(self, factors: Sequence[float]) -> "Thresholds":
        """Copy with throughput targets multiplied group-wise by ``factors``."""
        tp = tuple(t * f for t, f in zip(self.throughput, factors))
        return Thresholds(tp, self.delay, self.ratios, self.unit, self.kappa, self.delta)

    def to_dict(self) -> dict:
        return {
            "throughput": list(self.throughput),
            "delay": list(self.delay),
            "ratios": list(self.ratios),
            "unit": self.unit,
            "kappa": list(self.kappa),
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Thresholds":
        return cls(
            tuple(d["throughput"]),
            tuple(d["delay"]),
            tuple(d.get("ratios", (3.0, 2.0, 1.0))),
            d.get("unit", 1.0),
            tuple(d.get("kappa", (0.8, 0.8, 0.8))),
            d.get("delta", 0.03),
        )


UDP_DELAYS = (0.15, 0.3, 0.4)
TCP_DELAYS = (0.1, 0.15, 0.2)


@dataclass(frozen=True)
class ObservationBounds:
    low: tuple[float, ...] = (0.0,) * 6
    high: tuple[float, ...] = (40 * MBPS, 1.0) * 3

    @classmethod
    def for_delay_cap(cls, max_throughput: float, max_delay: float) -> "ObservationBounds":
        return cls((0.0,) * 6, (max_throughput, max_delay) * 3)


# --------------------------------------------------------------- observations
def build_observation(
    served: Sequence[int],
    metrics: SnapshotMetrics,
    bounds: ObservationBounds | None = None,
) -> np.ndarray:
    """``(T_g, d_g, T_s, d_s, T_b, d_b)`` for the groups an agent serves.

    Slots of unserved groups stay 0. Values are the network-wide aggregate of
    each served group, so they compare directly with the group thresholds. A
    served group that offered traffic but delivered nothing reports the delay
    ceiling of ``bounds`` (or ``inf`` without bounds).
    """
    obs = np.zeros(6)
    served = set(int(g) for g in served)
    for g in GROUPS:
        if g not in served:
            continue
        obs[2 * g] = metrics.group_throughput[g]
        d = metrics.group_delay[g]
        if d is None:
            d = 0.0 if metrics.group_offered[g] <= 0 else (bounds.high[2 * g + 1] if bounds else math.inf)
        obs[2 * g + 1] = d
    if bounds is not None:
        obs = np.clip(obs, bounds.low, bounds.high)
    return obs


def get_discrete_state(obs, low, high, size: int = DISCRETE_OS_SIZE) -> np.ndarray:
    """Bin each component into ``size`` equal windows over ``[low, high]``."""
    obs = np.asarray(obs, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    if not np.all(low < high):
        raise PreconditionError("observation bounds need low < high componentwise")
    win = (high - low) / size
    k = np.floor((obs - low) / win)
    # nudge values that roundoff pushed across a bin edge
    k = np.where(low + (k + 1) * win <= obs, k + 1, k)
    k = np.where(low + k * win > obs, k - 1, k)
    return np.clip(k, 0, size - 1).astype(np.int64)


def state_features(discrete: np.ndarray, size: int = DISCRETE_OS_SIZE) -> np.ndarray:
    """Discrete bins rescaled to [0, 1] as network input."""
    return np.asarray(discrete, dtype=np.float64) / (size - 1)


# -------------------------------------------------------------------- actions
def action_signs(a: int) -> tuple[int, int, int]:
    """Bit 2 -> gold, bit 1 -> silver, bit 0 -> bronze; a set bit means +delta."""
    if not 0 <= a < N_ACTIONS:
        raise PreconditionError(f"action {a} outside [0, 7]")
    return tuple(1 if (a >> (2 - g)) & 1 else -1 for g in GROUPS)


def action_index(signs: Sequence[int]) -> int:
    return sum(1 << (2 - g) for g, s in enumerate(signs) if s > 0)


def apply_action(weights, a: int, delta: float = 0.03, w_min: float = W_MIN, w_max: float = W_MAX):
    return tuple(
        round(min(max(w + s * delta, w_min), w_max), 10) for w, s in zip(weights, action_signs(a))
    )


# --------------------------------------------------------------------- reward
def congestion_flags(
    metrics: SnapshotMetrics,
    th: Thresholds,
    link_capacity: Sequence[float] | None = None,
    group_links: Sequence[Sequence[int]] | None = None,
) -> list[bool]:
    """Whether each group is in the congested regime this snapshot.

    A group qualifies when its offered load reaches its throughput target.
    With ``link_capacity`` and ``group_links`` it must also cross at least one
    link whose offered load exceeds capacity.
    """
    flags = [metrics.group_offered[g] >= th.throughput[g] for g in GROUPS]
    if link_capacity is not None and group_links is not None:
        for g in GROUPS:
            flags[g] = flags[g] and any(
                metrics.link_offered[l] > link_capacity[l] for l in group_links[g]
            )
    return flags


def reward_terms(
    served: Sequence[int],
    throughput: Sequence[float],
    delay: Sequence[float | None],
    th: Thresholds,
    congested: Sequence[bool],
) -> list[tuple[str, int, bool, float]]:
    """The counted ``(kind, group, met, magnitude)`` terms of one agent's reward."""
    terms = []
    for g in sorted(set(int(x) for x in served)):
        if congested[g]:
            terms.append(("throughput", g, throughput[g] >= th.throughput[g], th.eta(g)))
        if delay[g] is not None:
            terms.append(("delay", g, delay[g] <= th.delay[g], th.phi(g)))
    return terms


def compute_reward(served, throughput, delay, th: Thresholds, congested) -> tuple[float, float]:
    """Return ``(reward, best attainable reward)`` for one agent."""
    terms = reward_terms(served, throughput, delay, th, congested)
    r = sum(m if met else -m for _, _, met, m in terms)
    best = sum(m for *_, m in terms)
    return r, best


# ----------------------------------------------------------------- adjacency
def build_adjacency(agent: int, neighbors: Sequence[int], n: int) -> np.ndarray:
    """``(|B|+1) x n`` one-hot rows: the agent itself, then each neighbour."""
    nb = list(neighbors)
    if len(set(nb)) != len(nb):
        raise PreconditionError(f"duplicate neighbour in {nb}")
    if agent in nb:
        raise PreconditionError("an agent cannot list itself as a neighbour")
    rows = [agent] + nb
    if any(not 0 <= r < n for r in rows):
        raise PreconditionError(f"agent index out of range for {n} agents")
    C = np.zeros((len(rows), n), dtype=np.int8)
    C[np.arange(len(rows)), rows] = 1
    return C


def adjacency_mask(adjacency: Sequence[np.ndarray]) -> np.ndarray:
    """Stack per-agent adjacency matrices into an ``N x N`` attention mask."""
    n = len(adjacency)
    mask = np.zeros((n, n), dtype=bool)
    for i, C in enumerate(adjacency):
        if C.shape[1] != n:
            raise DimensionError(f"adjacency of agent {i} has {C.shape[1]} columns, expected {n}")
        mask[i] = C.sum(axis=0) > 0
    return mask


# ------------------------------------------------------------ environment
@dataclass
class StepInfo:
    metrics: SnapshotMetrics
    congested: list[bool]
    weights: list[tuple[float, float, float]]
    best: list[float]


@dataclass
class EnvConfig:
    snapshot: float = 10.0
    seed: int = 0
    scheduler: str = "wfq"
    overload_gating: bool = True
    random_weights: bool = True
    initial_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)
    queue_limit: int = 100
    jitter: float = 0.1


class QueueingEnv:
    """Agents on WFQ ports of a simulated network, stepped one snapshot at a time.

    ``scenario`` needs ``topology``, ``flows``, ``agent_links`` (link index per
    agent), ``neighbors`` (neighbour agent indices per agent), ``thresholds``
    and ``bounds``.
    """

    def __init__(self, scenario, config: EnvConfig | None = None, trace: IO[str] | None = None):
        self.scenario = scenario
        self.config = config or EnvConfig(snapshot=scenario.snapshot)
        self.trace = trace
        self.n_agents = len(scenario.agent_links)
        self.thresholds: Thresholds = scenario.thresholds
        self.bounds: ObservationBounds = scenario.bounds
        self.adjacency = [build_adjacency(i, nb, self.n_agents) for i, nb in enumerate(scenario.neighbors)]
        self.mask = adjacency_mask(self.adjacency)
        links = scenario.topology.links
        self._capacity = [l.capacity for l in links]
        self.served: list[list[int]] = []
        for link in scenario.agent_links:
            self.served.append(sorted({int(f.group) for f in scenario.flows if link in f.route}))
        self._group_links = [
            sorted({l for f in scenario.flows if int(f.group) == g for l in f.route if links[l].bottleneck})
            for g in GROUPS
        ]
        self.rng = np.random.default_rng(self.config.seed)
        self.sim: Simulator | None = None
        self.weights: list[tuple[float, float, float]] = []
        self.t = 0
        self.last_obs: np.ndarray | None = None

    # ------------------------------------------------------------------
    def _new_sim(self) -> Simulator:
        return Simulator(
            self.scenario.topology,
            self.scenario.flows,
            seed=int(self.rng.integers(2**31)),
            scheduler=self.config.scheduler,
            queue_limit=self.config.queue_limit,
            jitter=self.config.jitter,
        )

    def random_weights(self) -> tuple[float, float, float]:
        """Random start weights ordered gold > silver > bronze."""
        w = np.sort(self.rng.uniform(0.1, 0.9, size=3))[::-1]
        return tuple(round(float(x), 2) for x in w)

    def reset(self, restart: bool = False, weights=None) -> np.ndarray:
        """Draw start weights, run one snapshot and return the observations.

        The simulator keeps running across resets unless ``restart`` is set,
        so traffic stays on its diurnal cycle between episodes.
        """
        if self.sim is None or restart:
            self.sim = self._new_sim()
            self.t = 0
        if weights is not None:
            self.weights = [tuple(w) for w in weights]
        elif self.config.random_weights:
            self.weights = [self.random_weights() for _ in range(self.n_agents)]
        else:
            self.weights = [tuple(self.config.initial_weights)] * self.n_agents
        for i, link in enumerate(self.scenario.agent_links):
            self.sim.set_weights(link, self.weights[i])
        obs, _, _, _ = self._advance()
        return obs

    def step(self, joint_action: Sequence[int]):
        if self.sim is None:
            raise PreconditionError("call reset() before step()")
        if len(joint_action) != self.n_agents:
            raise PreconditionError(f"expected {self.n_agents} actions, got {len(joint_action)}")
        if self.config.scheduler == "wfq":
            delta = self.thresholds.delta
            for i, a in enumerate(joint_action):
                self.weights[i] = apply_action(self.weights[i], int(a), delta)
                self.sim.set_weights(self.scenario.agent_links[i], self.weights[i])
        obs, rewards, dones, info = self._advance()
        if self.trace is not None:
            for i in range(self.n_agents):
                rec = {
                    "step": self.t,
                    "agent": i,
                    "action": int(joint_action[i]),
                    "reward": round(float(rewards[i]), 10),
                    "done": bool(dones[i]),
                }
                self.trace.write(json.dumps(rec) + "\n")
        return obs, rewards, dones, info

    def _advance(self):
        sim = self.sim
        sim.run(sim.now + self.config.snapshot)
        m = sim.collect_snapshot(self.config.snapshot)
        self.t += 1
        th = self.thresholds
        if self.config.overload_gating:
            congested = congestion_flags(m, th, self._capacity, self._group_links)
        else:
            congested = congestion_flags(m, th)
        obs = np.stack([build_observation(s, m, self.bounds) for s in self.served])
        rewards = np.zeros(self.n_agents)
        best = []
        for i, s in enumerate(self.served):
            rewards[i], b = compute_reward(s, m.group_throughput, m.group_delay, th, congested)
            best.append(b)
        dones = np.array([rewards[i] >= best[i] - 1e-9 for i in range(self.n_agents)])
        self.last_obs = obs
        return obs, rewards, dones, StepInfo(m, congested, list(self.weights), best)

    # ------------------------------------------------------------------
    def discretize(self, obs: np.ndarray) -> np.ndarray:
        return np.stack([get_discrete_state(o, self.bounds.low, self.bounds.high) for o in obs])

    def features(self, obs: np.ndarray) -> np.ndarray:
        return state_features(self.discretize(obs))
