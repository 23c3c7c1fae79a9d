"""Network graph, traffic classes and flow descriptions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import networkx as nx

from ..errors import ConfigError


class FlowGroup(IntEnum):
    """Traffic classes. Lower value means more important: GOLD > SILVER > BRONZE."""

    GOLD = 0
    SILVER = 1
    BRONZE = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "FlowGroup":
        if isinstance(value, FlowGroup):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


GROUPS = (FlowGroup.GOLD, FlowGroup.SILVER, FlowGroup.BRONZE)


class Transport(str, Enum):
    OPEN_LOOP = "open"  # UDP-like constant-bit-rate source
    CLOSED_LOOP = "closed"  # window-based AIMD (TCP-like)


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    capacity: float  # bits/s
    prop_delay: float  # s
    bottleneck: bool = False


@dataclass(frozen=True)
class RateProfile:
    """Sinusoidal on-off rate: ``peak/2 * (1 + sin(2 pi t / period + phase))``."""

    peak: float  # bits/s
    period: float  # s
    phase: float = 0.0  # rad


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    group: FlowGroup
    src: str
    dst: str
    route: tuple[int, ...]  # link indices, src -> dst
    rate: RateProfile
    transport: Transport = Transport.OPEN_LOOP
    packet_size: int = 1000  # bytes


@dataclass
class Topology:
    nodes: list[str]
    links: list[Link] = field(default_factory=list)

    def __post_init__(self):
        self.validate()
        self._index = {(l.src, l.dst): i for i, l in enumerate(self.links)}

    def validate(self) -> None:
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise ConfigError("duplicate node ids")
        seen = set()
        for l in self.links:
            if l.src == l.dst:
                raise ConfigError(f"self-loop on {l.src}")
            if l.src not in known or l.dst not in known:
                raise ConfigError(f"link {l.src}->{l.dst} references an unknown node")
            if not l.capacity > 0 or not math.isfinite(l.capacity):
                raise ConfigError(f"link {l.src}->{l.dst}: capacity must be > 0")
            if l.prop_delay < 0:
                raise ConfigError(f"link {l.src}->{l.dst}: negative propagation delay")
            if (l.src, l.dst) in seen:
                raise ConfigError(f"duplicate link {l.src}->{l.dst}")
            seen.add((l.src, l.dst))
        if len(self.nodes) > 1 and not nx.is_connected(self.graph().to_undirected()):
            raise ConfigError("topology is not connected")

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for i, l in enumerate(self.links):
            g.add_edge(l.src, l.dst, index=i)
        return g

    def link_index(self, src: str, dst: str) -> int:
        try:
            return self._index[(src, dst)]
        except KeyError:
            raise ConfigError(f"no link {src}->{dst}") from None

    def path_to_route(self, path: list[str]) -> tuple[int, ...]:
        return tuple(self.link_index(a, b) for a, b in zip(path[:-1], path[1:]))

    def route_to_path(self, route: tuple[int, ...]) -> list[str]:
        if not route:
            return []
        return [self.links[route[0]].src] + [self.links[i].dst for i in route]

    def shortest_route(self, src: str, dst: str) -> tuple[int, ...]:
        return self.path_to_route(nx.shortest_path(self.graph(), src, dst))

    def prop_delay(self, route) -> float:
        return sum(self.links[i].prop_delay for i in route)

    def check_route(self, flow: FlowSpec) -> None:
        if not flow.route:
            raise ConfigError(f"flow {flow.flow_id}: empty route")
        for i in flow.route:
            if not 0 <= i < len(self.links):
                raise ConfigError(f"flow {flow.flow_id}: unknown link {i}")
        path = self.route_to_path(flow.route)
        ok = all(
            self.links[a].dst == self.links[b].src for a, b in zip(flow.route[:-1], flow.route[1:])
        )
        if not ok or path[0] != flow.src or path[-1] != flow.dst:
            raise ConfigError(f"flow {flow.flow_id}: route is not a {flow.src}->{flow.dst} path")
        if flow.rate.peak < 0:
            raise ConfigError(f"flow {flow.flow_id}: negative peak rate")
