"""Evaluation campaigns, SLA accounting and communication-overhead metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import IO, Iterable

import numpy as np

from ..env import EnvConfig, QueueingEnv
from ..errors import ConfigError, PreconditionError
from ..netsim import GROUPS, SnapshotMetrics
from ..nn import ParamSet
from .scenarios import Scenario


def comm_overhead(comm_log: list[Iterable[tuple[int, int]]], R: int, T: int) -> float:
    """``beta = sum_t g_t / (R * T)`` with ``g_t`` the distinct communicating pairs at step t."""
    if R <= 0 or T <= 0:
        raise PreconditionError(f"R and T must be positive (R={R}, T={T})")
    total = sum(len({(min(a, b), max(a, b)) for a, b in pairs if a != b}) for pairs in comm_log[:T])
    return total / (R * T)


def feature_bandwidth(conv_layers: int, feature_dim: int, bytes_per_value: int, refresh_period_s: float) -> float:
    """kbit/s each communicating link must reserve for feature exchange."""
    if conv_layers < 0 or feature_dim <= 0 or bytes_per_value <= 0 or refresh_period_s <= 0:
        raise PreconditionError("feature_bandwidth needs positive sizes and period")
    return conv_layers * feature_dim * bytes_per_value * 8 / (refresh_period_s * 1000)


def policy_pairs(policy_name: str, scenario: Scenario) -> set[tuple[int, int]]:
    """Agent pairs exchanging data at every step under a policy.

    DGN talks over the scenario's neighbour links; the centralized baseline
    pools every agent's observation, which counts as all pairs; distributed
    learners and PQ never communicate.
    """
    if policy_name == "dgn":
        return scenario.comm_pairs()
    if policy_name == "madqn-central":
        return set(combinations(range(scenario.n_agents), 2))
    return set()


@dataclass
class SnapshotRecord:
    index: int
    metrics: SnapshotMetrics
    congested: list[bool]
    weights: list[tuple[float, float, float]]
    actions: list[int]
    rewards: list[float]
    dones: list[bool]


@dataclass
class CampaignResult:
    scenario: str
    policy: str
    seed: int
    thresholds: dict
    records: list[SnapshotRecord] = field(default_factory=list)
    beta: float = 0.0
    bandwidth_kbps: float = 0.0
    loss_curve: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def sla(self) -> dict:
        return sla_table(self.records, self.thresholds)


def throughput_met(m: SnapshotMetrics, g: int, target: float) -> bool:
    return m.group_throughput[g] >= target


def delay_met(m: SnapshotMetrics, g: int, limit: float) -> bool:
    """Offered traffic that delivered nothing counts as a violation."""
    d = m.group_delay[g]
    if d is None:
        return m.group_offered[g] <= 0
    return d <= limit


def sla_table(records: list[SnapshotRecord], thresholds: dict) -> dict:
    """Per-group satisfaction: throughput over congested snapshots, delay over all.

    Fractions are ``None`` when a group was never congested (or no snapshots ran).
    """
    tp_t, d_t = thresholds["throughput"], thresholds["delay"]
    out = {"throughput": {}, "delay": {}, "congested": {}, "snapshots": len(records)}
    for g in GROUPS:
        label = ("gold", "silver", "bronze")[g]
        cong = [r for r in records if r.congested[g]]
        ok = sum(throughput_met(r.metrics, g, tp_t[g]) for r in cong)
        out["congested"][label] = len(cong)
        out["throughput"][label] = ok / len(cong) if cong else None
        dok = sum(delay_met(r.metrics, g, d_t[g]) for r in records)
        out["delay"][label] = dok / len(records) if records else None
    return out


def run_campaign(
    scenario: Scenario,
    policy,
    snapshots: int | None = None,
    *,
    seed: int | None = None,
    config: EnvConfig | None = None,
    trace: IO[str] | None = None,
) -> CampaignResult:
    """Run ``policy`` greedily for ``snapshots`` steps and record every snapshot.

    ``policy`` follows the :class:`~smartqueue.agents.policies.Policy`
    interface; learning policies must already hold trained parameters.
    """
    snapshots = scenario.snapshots if snapshots is None else snapshots
    seed = scenario.seed if seed is None else seed
    if snapshots < 0:
        raise PreconditionError("snapshots must be >= 0")
    if policy.n_agents != scenario.n_agents:
        raise ConfigError(f"policy built for {policy.n_agents} agents, scenario has {scenario.n_agents}")
    if config is None:
        config = EnvConfig(snapshot=scenario.snapshot, seed=seed)
    config.scheduler = policy.scheduler
    res = CampaignResult(scenario.name, policy.name, seed, scenario.thresholds.to_dict())
    if snapshots == 0:
        return res
    env = QueueingEnv(scenario, config, trace)
    rng = np.random.default_rng([seed, 3])
    feats = env.features(env.reset())
    pairs = policy_pairs(policy.name, scenario)
    comm_log = []
    for k in range(snapshots):
        actions = policy.act(feats, env.mask, 0.0, rng)
        obs, rewards, dones, info = env.step(actions)
        feats = env.features(obs)
        res.records.append(
            SnapshotRecord(
                k, info.metrics, list(info.congested), list(info.weights),
                [int(a) for a in actions], [float(r) for r in rewards], [bool(d) for d in dones],
            )
        )
        comm_log.append(pairs)
    R = scenario.n_agents * (scenario.n_agents - 1) // 2
    res.beta = comm_overhead(comm_log, R, snapshots) if R else 0.0
    if policy.name == "dgn":
        res.bandwidth_kbps = feature_bandwidth(policy.cfg.conv_layers, policy.cfg.hidden, 4, scenario.snapshot)
    return res


def check_checkpoint(policy, params: ParamSet) -> None:
    """Raise :class:`ConfigError` when ``params`` do not fit ``policy``."""
    try:
        policy.state().check_compatible(params)
    except ValueError as exc:
        raise ConfigError(f"checkpoint does not match the {policy.name} network: {exc}") from None
