"""Path selection over the device graph.

Honest devices forward along the minimum-latency path; among equal-latency
paths the lexicographically smallest sequence of device pdl ids wins. A FraudRouter
device on that path diverts traffic onto the cheapest suffix it can reach
without revisiting upstream devices.
"""

import logging
from typing import List, NamedTuple, Optional, Sequence

import networkx as nx

from src.database.models import BehaviorKind
from src.services.errors import NoPath
from .topology import Topology

logger = logging.getLogger(__name__)


class RouteDecision(NamedTuple):
    path: List[str]
    agreed_path: List[str]
    routed_by: Optional[str]

    @property
    def diverted(self) -> bool:
        return self.path != self.agreed_path


def _latency(graph: nx.Graph, path: Sequence[str]) -> int:
    return sum(graph.edges[a, b]["latency"] for a, b in zip(path, path[1:]))


def _candidates(graph: nx.Graph, src: str, dst: str, weight: str) -> List[List[str]]:
    if src not in graph or dst not in graph:
        raise NoPath(f"{src} or {dst} is not reachable")
    try:
        return [list(p) for p in nx.all_shortest_paths(graph, src, dst, weight=weight)]
    except nx.NetworkXNoPath as e:
        raise NoPath(f"no path from {src} to {dst}") from e


def _ids(graph: nx.Graph, path: Sequence[str]) -> List[str]:
    return [graph.nodes[n].get("pdl_id", n) for n in path]


def min_latency_path(graph: nx.Graph, src: str, dst: str) -> List[str]:
    return min(_candidates(graph, src, dst, "latency"), key=lambda p: _ids(graph, p))


def min_cost_path(graph: nx.Graph, src: str, dst: str) -> List[str]:
    # Cost first, then latency, then pdl ids
    return min(_candidates(graph, src, dst, "cost"), key=lambda p: (_latency(graph, p), _ids(graph, p)))


def honest_path(topology: Topology, src: str, dst: str) -> List[str]:
    for name in (src, dst):
        topology.device(name)
    return min_latency_path(topology.graph, src, dst)


def route(topology: Topology, src: str, dst: str, via_device_behavior: bool = True) -> RouteDecision:
    """Choose the path a flow actually takes from src to dst"""
    agreed = honest_path(topology, src, dst)
    if not via_device_behavior:
        return RouteDecision(agreed, agreed, None)

    for i, name in enumerate(agreed[:-1]):
        if topology.device(name).behavior.kind is not BehaviorKind.FRAUD_ROUTER:
            continue
        upstream = set(agreed[:i])
        reachable = topology.graph.subgraph(n for n in topology.graph if n not in upstream)
        try:
            suffix = min_cost_path(reachable, name, dst)
        except NoPath:
            continue
        path = agreed[:i] + suffix
        if path != agreed:
            logger.debug(f"[Routing] {name} diverted {agreed} -> {path}")
            return RouteDecision(path, agreed, name)
    return RouteDecision(agreed, agreed, None)
