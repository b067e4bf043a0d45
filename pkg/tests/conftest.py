from pathlib import Path
from types import SimpleNamespace

import pytest

from src.config.scenario import load_scenario
from src.database.access_control import MANAGER_ID, AccessControlDB
from src.database.models import Authority, LedgerConfig, ParticipantKind, ResourceRequest, Transaction
from src.database.network_log import NetworkLog
from src.services.contracts import ContractEngine, ContractRules
from src.services.ledger import Ledger
from src.services.network.topology import DeviceSpec, LinkSpec, TopologySpec, build_topology
from src.services.orchestration import OrchestrationService

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

AUTHORITIES = ["pdl-0001", "pdl-0002", "pdl-0003"]


@pytest.fixture
def make_ledger():
    def _make(authorities=AUTHORITIES, **overrides):
        config = LedgerConfig(
            authorities=[Authority(pdl_id=a, label=a) for a in authorities],
            **overrides
        )
        return Ledger(config)
    return _make


@pytest.fixture
def ledger(make_ledger):
    return make_ledger()


@pytest.fixture
def make_tx():
    def _make(submitter, nonce, now=0.0, contract="0xfeed", payload=b'{"op":"noop"}'):
        return Transaction(submitter=submitter, contract=contract, payload=payload, nonce=nonce, submit_ts=now)
    return _make


@pytest.fixture
def engine(ledger):
    ledger.register(MANAGER_ID)
    for submitter in ("pdl-0010", "pdl-0011"):
        ledger.register(submitter)
    return ContractEngine(ledger, ContractRules())


def _seal_until_drained(ledger, start: float = 0.0) -> float:
    now = max(start, ledger.tip.header.seal_ts)
    while ledger.pending_count:
        now = max(now, ledger.tip.header.seal_ts + ledger.config.block_interval)
        ledger.seal_block(now)
    return now


@pytest.fixture
def seal_until_drained():
    """Seal on cadence until the mempool is empty; returns the last seal time"""
    return _seal_until_drained


@pytest.fixture
def triangle_spec():
    devices = [
        DeviceSpec(name="R1", ip="10.0.0.1", owner="edge-co", vendor="vendor"),
        DeviceSpec(name="R2", ip="10.0.0.2", owner="edge-co", vendor="vendor"),
        DeviceSpec(name="R3", ip="10.0.0.3", owner="metro-net", vendor="vendor"),
    ]
    links = [
        LinkSpec(a="R1", b="R2", capacity=100, latency_ms=5, cost=2),
        LinkSpec(a="R2", b="R3", capacity=100, latency_ms=5, cost=2),
        LinkSpec(a="R1", b="R3", capacity=100, latency_ms=20, cost=1),
    ]
    return TopologySpec(devices=devices, links=links)


@pytest.fixture
def build_stack(triangle_spec):
    """Orchestration stack over the triangle.

    PDL-IDs: edge-co 0001, metro-net 0002, acme 0003, vendor 0004,
    regulator 0005, then R1 0006, R2 0007, R3 0008 (and any extra devices).
    """
    def _build(extra_devices=()):
        access = AccessControlDB()
        for kind, label in [
            (ParticipantKind.OWNER, "edge-co"),
            (ParticipantKind.OWNER, "metro-net"),
            (ParticipantKind.TENANT, "acme"),
            (ParticipantKind.VENDOR, "vendor"),
            (ParticipantKind.REGULATOR, "regulator"),
        ]:
            access.create_participant(kind, label)
        spec = TopologySpec(devices=list(triangle_spec.devices) + list(extra_devices), links=triangle_spec.links)
        topology = build_topology(spec, access.assign_device_id, access.pdl_id_for_label)
        config = LedgerConfig(authorities=[
            Authority(pdl_id=d.pdl_id, label=name) for name, d in topology.devices.items()
        ])
        ledger = Ledger(config)
        engine = ContractEngine(ledger, ContractRules(manager_id=MANAGER_ID))
        network_log = NetworkLog(topology.links.values())
        orchestrator = OrchestrationService(access, ledger, engine, topology, network_log)
        return SimpleNamespace(
            access=access,
            topology=topology,
            ledger=ledger,
            engine=engine,
            network_log=network_log,
            orchestrator=orchestrator,
        )
    return _build


@pytest.fixture
def stack(build_stack):
    return build_stack()


@pytest.fixture
def make_request(stack):
    def _make(request_id, src="R1", dst="R3", bandwidth=40.0, lease=100.0, target=15.0,
              at=0.0, tenant="acme", penalty_rate=10.0, credential=None):
        participant = stack.access.get_by_label(tenant) or stack.access.get(tenant)
        tenant_id = participant.pdl_id if participant else tenant
        return ResourceRequest(
            request_id=request_id,
            tenant=tenant_id,
            src_device=stack.topology.device(src).pdl_id,
            dst_device=stack.topology.device(dst).pdl_id,
            bandwidth=bandwidth,
            lease_duration=lease,
            latency_target=target,
            submitted_at=at,
            penalty_rate=penalty_rate,
            credential=credential or (participant.credential if participant else None),
        )
    return _make


@pytest.fixture
def demo_scenario():
    def _load(name="demo_triangle"):
        return load_scenario(SCENARIOS / f"{name}.toml")
    return _load
