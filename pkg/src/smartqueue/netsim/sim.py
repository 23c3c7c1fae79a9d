"""Discrete-event packet simulator.

Events are ``(time, seq, callback, arg)`` tuples on a binary heap; ``seq`` is a
global counter so simultaneous events fire in scheduling order and a run is
fully determined by its configuration and seed.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random

import numpy as np

from ..errors import ConfigError
from .metrics import SnapshotMetrics, aggregate
from .port import EnqueueResult, Packet, RedParams, WfqPort
from .sources import AimdEvent, AimdState, aimd_transport_step, onoff_rate
from .topology import FlowSpec, Topology, Transport

MAX_SOURCE_GAP = 0.02  # s; longest sleep of a quiet source between rate checks


def _offered_bits(profile, t: float) -> float:
    """Cumulative bits a sinusoidal profile offers over ``[0, t]``."""
    w = 2.0 * math.pi / profile.period
    return 0.5 * profile.peak * (t - (math.cos(w * t + profile.phase) - math.cos(profile.phase)) / w)


class _Source:
    __slots__ = ("flow", "bits", "credit", "last_t", "jitter", "rng")

    def __init__(self, flow: FlowSpec, rng: random.Random, jitter: float, t0: float):
        self.flow = flow
        self.bits = flow.packet_size * 8.0
        self.credit = 0.0
        self.last_t = t0
        self.jitter = jitter
        self.rng = rng


class _Window:
    """Closed-loop sender state."""

    __slots__ = ("state", "inflight", "backlog", "recovery_until", "srtt", "base_rtt")

    def __init__(self, base_rtt: float):
        self.state = AimdState(cwnd=1.0, ssthresh=64.0)
        self.inflight = 0
        self.backlog = 0
        self.recovery_until = -1.0
        self.base_rtt = base_rtt
        self.srtt = base_rtt


class Simulator:
    def __init__(
        self,
        topology: Topology,
        flows: list[FlowSpec],
        *,
        seed: int = 0,
        scheduler: str = "wfq",
        weights: dict[int, tuple[float, float, float]] | None = None,
        red: RedParams = RedParams(),
        queue_limit: int = 100,
        jitter: float = 0.1,
        app_buffer: int = 1000,
        keep_packets: bool = False,
    ):
        self.topology = topology
        self.flows = list(flows)
        for i, fl in enumerate(self.flows):
            if fl.flow_id != i:
                raise ConfigError("flow ids must be 0..n-1 in order")
            topology.check_route(fl)
        self.now = 0.0
        self._heap: list = []
        self._seq = itertools.count()
        self.keep_packets = keep_packets
        self.delivered_packets: list[Packet] = []
        self.app_buffer = app_buffer

        ss = np.random.SeedSequence(seed)
        port_seeds, src_seeds = ss.spawn(2)
        port_rngs = [random.Random(int(s.generate_state(1)[0])) for s in port_seeds.spawn(len(topology.links))]
        src_rngs = [random.Random(int(s.generate_state(1)[0])) for s in src_seeds.spawn(len(self.flows))]
        sizes = [fl.packet_size for fl in self.flows] or [1000]
        weights = weights or {}
        self.ports = [
            WfqPort(
                i,
                link.capacity,
                weights.get(i, (0.5, 0.3, 0.2)),
                red=red,
                queue_limit=queue_limit,
                scheduler=scheduler,
                rng=port_rngs[i],
                mean_packet_bits=8.0 * float(np.mean(sizes)),
            )
            for i, link in enumerate(topology.links)
        ]
        self._link_tx = [1.0 / l.capacity for l in topology.links]
        self._link_prop = [l.prop_delay for l in topology.links]
        self._routes = [fl.route for fl in self.flows]
        self._route_prop = [topology.prop_delay(fl.route) for fl in self.flows]

        n = len(self.flows)
        self.injected = 0
        self.delivered = 0
        self.dropped = 0
        self._reset_window(0.0)
        self._windows: list[_Window | None] = [None] * n
        self._sources = []
        for i, fl in enumerate(self.flows):
            src = _Source(fl, src_rngs[i], jitter, 0.0)
            self._sources.append(src)
            if fl.transport is Transport.CLOSED_LOOP:
                self._windows[i] = _Window(2.0 * self._route_prop[i])
            if fl.rate.peak > 0:
                self.schedule(src.rng.random() * 1e-3, self._source_tick, src)

    # ---------------------------------------------------------------- engine
    def schedule(self, t: float, fn, arg=None) -> None:
        if t < self.now:
            raise AssertionError(f"event scheduled in the past ({t} < {self.now})")
        heapq.heappush(self._heap, (t, next(self._seq), fn, arg))

    def run(self, until: float) -> int:
        """Process every event with timestamp <= ``until``; return the count."""
        heap = self._heap
        pop = heapq.heappop
        count = 0
        while heap and heap[0][0] <= until:
            t, _, fn, arg = pop(heap)
            self.now = t
            fn(arg)
            count += 1
        if until > self.now:
            self.now = until
        return count

    def set_weights(self, link: int, weights) -> None:
        self.ports[link].set_weights(weights)

    # --------------------------------------------------------------- sources
    def _source_tick(self, src: _Source) -> None:
        now = self.now
        prof = src.flow.rate
        src.credit += _offered_bits(prof, now) - _offered_bits(prof, src.last_t)
        src.last_t = now
        fid = src.flow.flow_id
        if src.credit >= src.bits:
            src.credit -= src.bits
            self._w_offered[fid] += src.bits
            win = self._windows[fid]
            if win is None:
                self._inject(Packet(fid, int(src.flow.group), src.flow.packet_size, now))
            else:
                if win.backlog < self.app_buffer:
                    win.backlog += 1
                self._try_send(fid)
        rate = onoff_rate(prof, now)
        need = src.bits - src.credit
        if need <= 0:
            dt = 0.0
        elif rate * MAX_SOURCE_GAP < need:
            dt = MAX_SOURCE_GAP
        else:
            dt = max(need / rate, 1e-6)  # avoid steps below float resolution of now
        if src.jitter:
            dt *= 1.0 + src.jitter * (2.0 * src.rng.random() - 1.0)
        self.schedule(now + dt, self._source_tick, src)

    def _try_send(self, fid: int) -> None:
        win = self._windows[fid]
        fl = self.flows[fid]
        while win.backlog > 0 and win.inflight < int(win.state.cwnd):
            win.backlog -= 1
            win.inflight += 1
            self._inject(Packet(fid, int(fl.group), fl.packet_size, self.now))

    def _on_ack(self, pkt: Packet) -> None:
        win = self._windows[pkt.flow]
        win.inflight -= 1
        win.srtt = 0.875 * win.srtt + 0.125 * (self.now - pkt.created)
        win.state = aimd_transport_step(AimdEvent.ACK, win.state)
        self._try_send(pkt.flow)

    def _on_loss(self, pkt: Packet) -> None:
        win = self._windows[pkt.flow]
        win.inflight -= 1
        win.backlog += 1  # resent later as a fresh packet
        if self.now >= win.recovery_until:
            win.state = aimd_transport_step(AimdEvent.LOSS, win.state)
            win.recovery_until = self.now + win.srtt
        self._try_send(pkt.flow)

    # ----------------------------------------------------------- forwarding
    def _inject(self, pkt: Packet) -> None:
        self.injected += 1
        self._arrive(pkt)

    def _arrive(self, pkt: Packet) -> None:
        link = self._routes[pkt.flow][pkt.hop]
        port = self.ports[link]
        if port.enqueue(pkt, self.now) is EnqueueResult.DROPPED:
            self.dropped += 1
            self._w_dropped[pkt.flow] += 1
            if self._windows[pkt.flow] is not None:
                self.schedule(self.now + self._route_prop[pkt.flow], self._on_loss, pkt)
            return
        pkt.hops.append((self.now, -1.0, -1.0))
        if not port.busy:
            self._start(port)

    def _start(self, port: WfqPort) -> None:
        pkt = port.dequeue(self.now)
        port.busy = True
        arr = pkt.hops[-1][0]
        pkt.hops[-1] = (arr, self.now, -1.0)
        self.schedule(self.now + pkt.size * 8.0 * self._link_tx[port.link_id], self._tx_done, (port, pkt))

    def _tx_done(self, arg) -> None:
        port, pkt = arg
        now = self.now
        arr, start, _ = pkt.hops[-1]
        pkt.hops[-1] = (arr, start, now)
        pkt.hop += 1
        t_next = now + self._link_prop[port.link_id]
        if pkt.hop == len(self._routes[pkt.flow]):
            self.schedule(t_next, self._deliver, pkt)
        else:
            self.schedule(t_next, self._arrive, pkt)
        if port.backlog():
            self._start(port)
        else:
            port.busy = False

    def _deliver(self, pkt: Packet) -> None:
        pkt.delivered_at = self.now
        self.delivered += 1
        f = pkt.flow
        self._w_bits[f] += pkt.size * 8
        self._w_delay[f] += self.now - pkt.created
        self._w_count[f] += 1
        if self.keep_packets:
            self.delivered_packets.append(pkt)
        if self._windows[f] is not None:
            self.schedule(self.now + self._route_prop[f], self._on_ack, pkt)

    # -------------------------------------------------------------- metrics
    def _reset_window(self, start: float) -> None:
        n = len(self.flows)
        self._w_start = start
        self._w_bits = [0.0] * n
        self._w_delay = [0.0] * n
        self._w_count = [0] * n
        self._w_offered = [0.0] * n
        self._w_dropped = [0] * n

    def collect_snapshot(self, window: float | None = None) -> SnapshotMetrics:
        """Metrics since the previous collection; resets the accumulators."""
        duration = self.now - self._w_start if window is None else window
        m = aggregate(
            self.flows,
            len(self.topology.links),
            self._w_start,
            duration,
            self._w_bits,
            self._w_delay,
            self._w_count,
            self._w_offered,
            self._w_dropped,
        )
        self._reset_window(self.now)
        return m

    def in_flight(self) -> int:
        """Packets inside the network, counted from queues and pending events."""
        count = sum(p.backlog() for p in self.ports)
        for _, _, fn, arg in self._heap:
            name = getattr(fn, "__name__", "")
            if name in ("_tx_done",):
                count += 1
            elif name in ("_arrive", "_deliver"):
                count += 1
        return count
