from .topology import Topology, TopologySpec, DeviceSpec, LinkSpec, build_topology
from .routing import RouteDecision, route, honest_path
from .packet_processor import PacketProcessor, PendingRecord, ProcessingDelays

__all__ = [
    "Topology",
    "TopologySpec",
    "DeviceSpec",
    "LinkSpec",
    "build_topology",
    "RouteDecision",
    "route",
    "honest_path",
    "PacketProcessor",
    "PendingRecord",
    "ProcessingDelays",
]
