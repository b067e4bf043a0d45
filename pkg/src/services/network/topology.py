import logging
from typing import Callable, Dict, List, Optional, Sequence

import networkx as nx
from pydantic import BaseModel, Field

from src.database.models import Behavior, BehaviorKind, Device, IPv4, Link
from src.services.errors import DanglingLink, DuplicateDeviceId, InvalidParams, UnknownDevice, UnknownLink

logger = logging.getLogger(__name__)


class DeviceSpec(BaseModel):
    name: str = Field(min_length=1, pattern=r"^[^|\s]+$")
    ip: IPv4
    owner: str
    vendor: str
    behavior: BehaviorKind = BehaviorKind.HONEST
    skew_ms: int = Field(default=0, ge=0)
    delay_ms: int = Field(default=0, ge=0)
    tee: bool = False


class LinkSpec(BaseModel):
    a: str
    b: str
    capacity: float = Field(gt=0)
    latency_ms: int = Field(ge=0)
    cost: float = Field(default=1.0, ge=0)
    id: Optional[str] = None

    @property
    def link_id(self) -> str:
        return self.id or f"{self.a}-{self.b}"


class TopologySpec(BaseModel):
    devices: List[DeviceSpec] = Field(default_factory=list)
    links: List[LinkSpec] = Field(default_factory=list)


class Topology:
    """Undirected device graph; nodes are device names, edges carry a Link"""

    def __init__(self, graph: nx.Graph, devices: Dict[str, Device], links: Dict[str, Link]):
        self.graph = graph
        self.devices = devices
        self.links = links
        self._by_pdl_id = {d.pdl_id: name for name, d in devices.items()}

    def device(self, name: str) -> Device:
        if name not in self.devices:
            raise UnknownDevice(f"unknown device: {name}")
        return self.devices[name]

    def device_by_pdl_id(self, pdl_id: str) -> Device:
        if pdl_id not in self._by_pdl_id:
            raise UnknownDevice(f"no device holds {pdl_id}")
        return self.devices[self._by_pdl_id[pdl_id]]

    def has_device(self, name: str) -> bool:
        return name in self.devices

    def link_between(self, a: str, b: str) -> Link:
        if not self.graph.has_edge(a, b):
            raise UnknownLink(f"no link between {a} and {b}")
        return self.graph.edges[a, b]["link"]

    def path_links(self, path: Sequence[str]) -> List[Link]:
        return [self.link_between(a, b) for a, b in zip(path, path[1:])]

    def path_latency(self, path: Sequence[str]) -> int:
        return sum(link.latency for link in self.path_links(path))

    def connected(self, a: str, b: str) -> bool:
        return nx.has_path(self.graph, a, b)

    def components(self) -> List[List[str]]:
        return [sorted(c) for c in nx.connected_components(self.graph)]


def build_topology(
    spec: TopologySpec,
    assign_id: Optional[Callable[[str], str]] = None,
    resolve_party: Optional[Callable[[str], str]] = None,
) -> Topology:
    """Validate a topology description and bind each device to a PDL-ID.

    `assign_id` maps a device name to its PDL-ID and `resolve_party` maps an
    owner or vendor label to a participant PDL-ID; both default to identity.
    """
    assign_id = assign_id or (lambda name: name)
    resolve_party = resolve_party or (lambda label: label)

    graph = nx.Graph()
    devices: Dict[str, Device] = {}
    seen_ids: Dict[str, str] = {}
    for d in spec.devices:
        if d.name in devices:
            raise DuplicateDeviceId(f"device declared twice: {d.name}")
        pdl_id = assign_id(d.name)
        if pdl_id in seen_ids:
            raise DuplicateDeviceId(f"{d.name} and {seen_ids[pdl_id]} share {pdl_id}")
        seen_ids[pdl_id] = d.name
        devices[d.name] = Device(
            name=d.name,
            pdl_id=pdl_id,
            ip=d.ip,
            owner=resolve_party(d.owner),
            vendor=resolve_party(d.vendor),
            behavior=Behavior(kind=d.behavior, skew_ms=d.skew_ms, delay_ms=d.delay_ms),
            tee_enabled=d.tee,
        )
        graph.add_node(d.name, pdl_id=pdl_id)

    links: Dict[str, Link] = {}
    for spec_link in spec.links:
        for end in (spec_link.a, spec_link.b):
            if end not in devices:
                raise DanglingLink(f"link {spec_link.link_id} references unknown device {end}")
        if spec_link.a == spec_link.b:
            raise InvalidParams(f"link {spec_link.link_id} is a self-loop")
        if graph.has_edge(spec_link.a, spec_link.b):
            raise InvalidParams(f"devices {spec_link.a} and {spec_link.b} are already linked")
        if spec_link.link_id in links:
            raise InvalidParams(f"link id declared twice: {spec_link.link_id}")
        link = Link(
            link_id=spec_link.link_id,
            a=spec_link.a,
            b=spec_link.b,
            capacity=spec_link.capacity,
            latency=spec_link.latency_ms,
            cost=spec_link.cost,
        )
        links[link.link_id] = link
        graph.add_edge(link.a, link.b, latency=link.latency, cost=link.cost, link=link)

    topology = Topology(graph, devices, links)
    components = topology.components()
    if len(components) > 1:
        logger.warning(f"[Topology] Graph has {len(components)} connected components")
    logger.info(f"[Topology] Built {len(devices)} devices, {len(links)} links")
    return topology
