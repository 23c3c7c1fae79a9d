"""Output port: per-group FIFOs under RED, served by WFQ or strict priority.

WFQ uses self-clocked finish tags. An arriving packet of group ``g`` gets

    F = max(V, last_finish[g]) + bits / (w_g * capacity)

and the scheduler serves the queue head with the smallest tag, setting the
virtual time ``V`` to that tag. Equal tags go to the more important group.
While all groups stay backlogged, group ``g`` receives ``w_g / sum(w)`` of
the link.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from enum import Enum

from ..errors import ConfigError

W_MIN = 0.01
W_MAX = 1.00


@dataclass(frozen=True)
class RedParams:
    min_th: float = 20.0  # packets
    max_th: float = 60.0  # packets
    max_p: float = 0.1
    weight: float = 0.002  # EWMA weight of the average queue

    def drop_probability(self, avg: float) -> float:
        if avg < self.min_th:
            return 0.0
        if avg >= self.max_th:
            return 1.0
        return self.max_p * (avg - self.min_th) / (self.max_th - self.min_th)


class EnqueueResult(Enum):
    QUEUED = "queued"
    DROPPED = "dropped"


class Packet:
    __slots__ = ("flow", "group", "size", "created", "hop", "hops", "tag", "delivered_at")

    def __init__(self, flow: int, group: int, size: int, created: float):
        self.flow = flow
        self.group = group
        self.size = size  # bytes
        self.created = created
        self.hop = 0
        # one (arrival, service start, service end) triple per traversed port
        self.hops: list[tuple[float, float, float]] = []
        self.tag = 0.0
        self.delivered_at: float | None = None

    @property
    def delay(self) -> float:
        return self.delivered_at - self.created

    def __repr__(self) -> str:
        return f"Packet(flow={self.flow}, group={self.group}, created={self.created:.6f})"


def check_weights(weights) -> list[float]:
    w = [float(x) for x in weights]
    if len(w) != 3:
        raise ConfigError(f"need three group weights, got {len(w)}")
    for x in w:
        if not W_MIN - 1e-12 <= x <= W_MAX + 1e-12:
            raise ConfigError(f"weight {x} outside [{W_MIN}, {W_MAX}]")
    return w


class WfqPort:
    def __init__(
        self,
        link_id: int,
        capacity: float,
        weights=(0.5, 0.3, 0.2),
        red: RedParams = RedParams(),
        queue_limit: int = 100,
        scheduler: str = "wfq",
        rng: random.Random | None = None,
        mean_packet_bits: float = 8000.0,
    ):
        if scheduler not in ("wfq", "pq"):
            raise ConfigError(f"unknown scheduler {scheduler!r}")
        self.link_id = link_id
        self.capacity = float(capacity)
        self.weights = check_weights(weights)
        self.red = red
        self.queue_limit = queue_limit
        self.scheduler = scheduler
        self.rng = rng or random.Random(link_id)
        self._slot = mean_packet_bits / self.capacity  # typical transmission time
        self.queues: list[deque] = [deque(), deque(), deque()]
        self.virtual_time = 0.0
        self.last_finish = [0.0, 0.0, 0.0]
        self.red_avg = [0.0, 0.0, 0.0]
        self._idle_since: list[float | None] = [0.0, 0.0, 0.0]
        self.busy = False
        self.arrivals = [0, 0, 0]
        self.drops = [0, 0, 0]
        self.served_bits = [0, 0, 0]

    def set_weights(self, weights) -> None:
        self.weights = check_weights(weights)

    def backlog(self) -> int:
        q = self.queues
        return len(q[0]) + len(q[1]) + len(q[2])

    def enqueue(self, pkt: Packet, now: float) -> EnqueueResult:
        g = pkt.group
        q = self.queues[g]
        red = self.red
        self.arrivals[g] += 1
        avg = self.red_avg[g]
        if q:
            avg += red.weight * (len(q) - avg)
        else:
            since = self._idle_since[g]
            if since is not None and avg > 0.0:
                avg *= (1.0 - red.weight) ** ((now - since) / self._slot)
            avg *= 1.0 - red.weight
        self.red_avg[g] = avg
        if avg >= red.min_th:
            p = red.drop_probability(avg)
            if p >= 1.0 or self.rng.random() < p:
                self.drops[g] += 1
                return EnqueueResult.DROPPED
        if len(q) >= self.queue_limit:
            self.drops[g] += 1
            return EnqueueResult.DROPPED
        start = self.last_finish[g]
        if self.virtual_time > start:
            start = self.virtual_time
        pkt.tag = start + pkt.size * 8.0 / (self.weights[g] * self.capacity)
        self.last_finish[g] = pkt.tag
        q.append(pkt)
        self._idle_since[g] = None
        return EnqueueResult.QUEUED

    def dequeue(self, now: float = 0.0) -> Packet | None:
        if self.scheduler == "pq":
            return self.pq_dequeue(now)
        return self.wfq_dequeue(now)

    def wfq_dequeue(self, now: float = 0.0) -> Packet | None:
        best = None
        best_tag = 0.0
        for g, q in enumerate(self.queues):
            if q and (best is None or q[0].tag < best_tag):
                best, best_tag = g, q[0].tag
        if best is None:
            return None
        pkt = self._pop(best, now)
        if pkt.tag > self.virtual_time:
            self.virtual_time = pkt.tag
        return pkt

    def pq_dequeue(self, now: float = 0.0) -> Packet | None:
        for g, q in enumerate(self.queues):
            if q:
                return self._pop(g, now)
        return None

    def _pop(self, g: int, now: float) -> Packet:
        q = self.queues[g]
        pkt = q.popleft()
        if not q:
            self._idle_since[g] = now
        self.served_bits[g] += pkt.size * 8
        return pkt


def wfq_enqueue(port: WfqPort, pkt: Packet, now: float) -> EnqueueResult:
    return port.enqueue(pkt, now)


def wfq_dequeue(port: WfqPort, now: float = 0.0) -> Packet | None:
    return port.wfq_dequeue(now)


def pq_dequeue(port: WfqPort, now: float = 0.0) -> Packet | None:
    return port.pq_dequeue(now)
