"""Packet-level discrete-event network simulator with WFQ/RED ports."""

from .metrics import SnapshotMetrics
from .port import (
    W_MAX,
    W_MIN,
    EnqueueResult,
    Packet,
    RedParams,
    WfqPort,
    pq_dequeue,
    wfq_dequeue,
    wfq_enqueue,
)
from .sim import Simulator
from .sources import AimdEvent, AimdState, aimd_transport_step, mean_rate, onoff_rate
from .topology import GROUPS, FlowGroup, FlowSpec, Link, RateProfile, Topology, Transport

__all__ = [
    "AimdEvent",
    "AimdState",
    "EnqueueResult",
    "FlowGroup",
    "FlowSpec",
    "GROUPS",
    "Link",
    "Packet",
    "RateProfile",
    "RedParams",
    "Simulator",
    "SnapshotMetrics",
    "Topology",
    "Transport",
    "W_MAX",
    "W_MIN",
    "WfqPort",
    "aimd_transport_step",
    "mean_rate",
    "onoff_rate",
    "pq_dequeue",
    "wfq_dequeue",
    "wfq_enqueue",
]
