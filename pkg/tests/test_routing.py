import heapq
import itertools
import random

import networkx as nx
import pytest

from src.database.models import BehaviorKind
from src.services.errors import DanglingLink, DuplicateDeviceId, InvalidParams, NoPath, UnknownLink
from src.services.network.routing import honest_path, route
from src.services.network.topology import DeviceSpec, LinkSpec, TopologySpec, build_topology


def _device(name, behavior=BehaviorKind.HONEST):
    return DeviceSpec(name=name, ip="10.0.0.1", owner="o", vendor="v", behavior=behavior)


def dijkstra_latency(edges, src, dst):
    adjacency = {}
    for a, b, latency in edges:
        adjacency.setdefault(a, []).append((b, latency))
        adjacency.setdefault(b, []).append((a, latency))
    best = {src: 0}
    queue = [(0, src)]
    while queue:
        d, node = heapq.heappop(queue)
        if node == dst:
            return d
        if d > best.get(node, float("inf")):
            continue
        for nxt, w in adjacency.get(node, []):
            if d + w < best.get(nxt, float("inf")):
                best[nxt] = d + w
                heapq.heappush(queue, (d + w, nxt))
    return None


@pytest.fixture
def triangle(triangle_spec):
    return build_topology(triangle_spec)


def test_honest_route_takes_minimum_latency(triangle):
    decision = route(triangle, "R1", "R3")

    assert decision.path == ["R1", "R2", "R3"]
    assert triangle.path_latency(decision.path) == 10
    assert not decision.diverted
    assert decision.routed_by is None


def test_fraud_router_diverts_to_cheap_link(triangle_spec):
    devices = [d.model_copy(update={"behavior": BehaviorKind.FRAUD_ROUTER}) if d.name == "R1" else d
               for d in triangle_spec.devices]
    topology = build_topology(TopologySpec(devices=devices, links=triangle_spec.links))

    decision = route(topology, "R1", "R3")
    assert decision.path == ["R1", "R3"]
    assert decision.agreed_path == ["R1", "R2", "R3"]
    assert decision.routed_by == "R1"
    assert topology.path_latency(decision.path) == 20


def test_fraud_router_without_alternative_keeps_path():
    spec = TopologySpec(
        devices=[_device("A"), _device("B", BehaviorKind.FRAUD_ROUTER), _device("C")],
        links=[LinkSpec(a="A", b="B", capacity=10, latency_ms=1), LinkSpec(a="B", b="C", capacity=10, latency_ms=1)],
    )
    decision = route(build_topology(spec), "A", "C")
    assert decision.path == ["A", "B", "C"]
    assert not decision.diverted


def test_equal_latency_paths_with_name_ids():
    spec = TopologySpec(
        devices=[_device(n) for n in ("S", "X", "B", "T")],
        links=[
            LinkSpec(a="S", b="X", capacity=10, latency_ms=2),
            LinkSpec(a="X", b="T", capacity=10, latency_ms=2),
            LinkSpec(a="S", b="B", capacity=10, latency_ms=2),
            LinkSpec(a="B", b="T", capacity=10, latency_ms=2),
        ],
    )
    assert honest_path(build_topology(spec), "S", "T") == ["S", "B", "T"]


def test_equal_latency_paths_break_ties_by_pdl_id():
    spec = TopologySpec(
        devices=[_device(n) for n in ("S", "X", "B", "T")],
        links=[
            LinkSpec(a="S", b="X", capacity=10, latency_ms=2),
            LinkSpec(a="X", b="T", capacity=10, latency_ms=2),
            LinkSpec(a="S", b="B", capacity=10, latency_ms=2),
            LinkSpec(a="B", b="T", capacity=10, latency_ms=2),
        ],
    )
    # Name order puts B first, id order puts X first
    ids = {"S": "pdl-0001", "X": "pdl-0002", "B": "pdl-0003", "T": "pdl-0004"}
    assert honest_path(build_topology(spec, assign_id=ids.__getitem__), "S", "T") == ["S", "X", "T"]


def test_fraud_router_diverting_after_shared_hop():
    spec = TopologySpec(
        devices=[_device("A", BehaviorKind.FRAUD_ROUTER)] + [_device(n) for n in ("B", "C", "D", "E")],
        links=[
            LinkSpec(a="A", b="B", capacity=10, latency_ms=1),
            LinkSpec(a="B", b="C", capacity=10, latency_ms=1, cost=10),
            LinkSpec(a="C", b="D", capacity=10, latency_ms=1, cost=10),
            LinkSpec(a="B", b="E", capacity=10, latency_ms=10),
            LinkSpec(a="E", b="D", capacity=10, latency_ms=10),
        ],
    )
    decision = route(build_topology(spec), "A", "D")
    assert decision.agreed_path == ["A", "B", "C", "D"]
    assert decision.path == ["A", "B", "E", "D"]
    assert decision.routed_by == "A"


def test_random_graphs_match_independent_search():
    rng = random.Random(3)
    for trial in range(40):
        names = [f"N{i}" for i in range(rng.randint(2, 7))]
        pairs = [p for p in itertools.combinations(names, 2) if rng.random() < 0.5]
        edges = [(a, b, rng.randint(1, 9)) for a, b in pairs]
        topology = build_topology(TopologySpec(
            devices=[_device(n) for n in names],
            links=[LinkSpec(a=a, b=b, capacity=10, latency_ms=w) for a, b, w in edges],
        ))
        src, dst = names[0], names[-1]
        expected = dijkstra_latency(edges, src, dst)
        if expected is None:
            with pytest.raises(NoPath):
                honest_path(topology, src, dst)
            continue

        path = honest_path(topology, src, dst)
        assert topology.path_latency(path) == expected, trial
        simple = nx.all_simple_paths(topology.graph, src, dst)
        assert path == min(simple, key=lambda p: (topology.path_latency(p), p)), trial


def test_single_device_path(triangle):
    assert honest_path(triangle, "R2", "R2") == ["R2"]


class TestTopologyValidation:
    def test_dangling_link(self):
        spec = TopologySpec(devices=[_device("A")], links=[LinkSpec(a="A", b="Z", capacity=1, latency_ms=1)])
        with pytest.raises(DanglingLink):
            build_topology(spec)

    def test_duplicate_device(self):
        with pytest.raises(DuplicateDeviceId):
            build_topology(TopologySpec(devices=[_device("A"), _device("A")]))

    def test_shared_pdl_id(self):
        spec = TopologySpec(devices=[_device("A"), _device("B")])
        with pytest.raises(DuplicateDeviceId):
            build_topology(spec, assign_id=lambda name: "pdl-0001")

    def test_self_loop(self):
        spec = TopologySpec(devices=[_device("A")], links=[LinkSpec(a="A", b="A", capacity=1, latency_ms=1)])
        with pytest.raises(InvalidParams):
            build_topology(spec)

    def test_parallel_link(self):
        spec = TopologySpec(
            devices=[_device("A"), _device("B")],
            links=[LinkSpec(a="A", b="B", capacity=1, latency_ms=1), LinkSpec(a="B", b="A", capacity=1, latency_ms=2)],
        )
        with pytest.raises(InvalidParams):
            build_topology(spec)

    def test_disconnected_graph_is_allowed(self):
        topology = build_topology(TopologySpec(devices=[_device("A"), _device("B")]))
        assert topology.components() == [["A"], ["B"]]
        with pytest.raises(UnknownLink):
            topology.link_between("A", "B")
