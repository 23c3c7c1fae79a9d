"""Per-snapshot telemetry."""

from __future__ import annotations

from dataclasses import dataclass, field

from .topology import GROUPS, FlowSpec


@dataclass
class SnapshotMetrics:
    """Throughput, delay and offered load over one snapshot window.

    Rates are bits/s, delays seconds. A delay is ``None`` when nothing of that
    flow (or group) was delivered in the window.
    """

    start: float
    duration: float
    flow_throughput: list[float]
    flow_delay: list[float | None]
    flow_offered: list[float]
    flow_delivered: list[int]
    flow_dropped: list[int]
    group_throughput: list[float]
    group_delay: list[float | None]
    group_offered: list[float]
    link_offered: list[float]
    # (link index, group) -> value, over flows whose route crosses the link
    port_throughput: dict[tuple[int, int], float] = field(default_factory=dict)
    port_delay: dict[tuple[int, int], float | None] = field(default_factory=dict)
    port_offered: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def end(self) -> float:
        return self.start + self.duration


def aggregate(
    flows: list[FlowSpec],
    n_links: int,
    start: float,
    duration: float,
    bits: list[float],
    delay_sum: list[float],
    delivered: list[int],
    offered_bits: list[float],
    dropped: list[int],
) -> SnapshotMetrics:
    d = duration if duration > 0 else 1.0
    f_tp = [b / d for b in bits]
    f_delay = [s / n if n else None for s, n in zip(delay_sum, delivered)]
    f_off = [b / d for b in offered_bits]

    g_bits = [0.0] * 3
    g_dsum = [0.0] * 3
    g_n = [0] * 3
    g_off = [0.0] * 3
    link_off = [0.0] * n_links
    p_bits: dict[tuple[int, int], float] = {}
    p_dsum: dict[tuple[int, int], float] = {}
    p_n: dict[tuple[int, int], int] = {}
    p_off: dict[tuple[int, int], float] = {}
    for i, fl in enumerate(flows):
        g = int(fl.group)
        g_bits[g] += bits[i]
        g_dsum[g] += delay_sum[i]
        g_n[g] += delivered[i]
        g_off[g] += offered_bits[i]
        for link in fl.route:
            link_off[link] += offered_bits[i] / d
            key = (link, g)
            p_bits[key] = p_bits.get(key, 0.0) + bits[i]
            p_dsum[key] = p_dsum.get(key, 0.0) + delay_sum[i]
            p_n[key] = p_n.get(key, 0) + delivered[i]
            p_off[key] = p_off.get(key, 0.0) + offered_bits[i]

    return SnapshotMetrics(
        start=start,
        duration=duration,
        flow_throughput=f_tp,
        flow_delay=f_delay,
        flow_offered=f_off,
        flow_delivered=list(delivered),
        flow_dropped=list(dropped),
        group_throughput=[b / d for b in g_bits],
        group_delay=[g_dsum[g] / g_n[g] if g_n[g] else None for g in GROUPS],
        group_offered=[b / d for b in g_off],
        link_offered=link_off,
        port_throughput={k: v / d for k, v in p_bits.items()},
        port_delay={k: p_dsum[k] / p_n[k] if p_n[k] else None for k in p_bits},
        port_offered={k: v / d for k, v in p_off.items()},
    )
