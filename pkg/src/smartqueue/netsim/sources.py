"""Traffic source models: sinusoidal on-off rate and AIMD window control."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .topology import FlowSpec, RateProfile


def onoff_rate(spec: FlowSpec | RateProfile, t: float) -> float:
    """Offered rate in bits/s at time ``t``."""
    p = spec.rate if isinstance(spec, FlowSpec) else spec
    r = 0.5 * p.peak * (1.0 + math.sin(2.0 * math.pi * t / p.period + p.phase))
    return min(max(r, 0.0), p.peak)


def mean_rate(profile: RateProfile, t0: float, t1: float) -> float:
    """Exact average of :func:`onoff_rate` over ``[t0, t1]``."""
    if t1 <= t0:
        return onoff_rate(profile, t0)
    w = 2.0 * math.pi / profile.period
    integral = (t1 - t0) - (math.cos(w * t1 + profile.phase) - math.cos(w * t0 + profile.phase)) / w
    return 0.5 * profile.peak * integral / (t1 - t0)


class AimdEvent(Enum):
    ACK = "ack"
    LOSS = "loss"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class AimdState:
    cwnd: float = 1.0  # packets
    ssthresh: float = 64.0

    @property
    def slow_start(self) -> bool:
        return self.cwnd < self.ssthresh


def aimd_transport_step(event: AimdEvent, state: AimdState) -> AimdState:
    w = state.cwnd
    if event is AimdEvent.ACK:
        return replace(state, cwnd=w + 1.0 if w < state.ssthresh else w + 1.0 / w)
    if event is AimdEvent.LOSS:
        half = max(w / 2.0, 1.0)
        return AimdState(cwnd=half, ssthresh=half)
    if event is AimdEvent.TIMEOUT:
        return AimdState(cwnd=1.0, ssthresh=max(w / 2.0, 2.0))
    raise ValueError(f"unknown event {event!r}")
