"""
NETWORK SIMULATION
==================

Single-threaded discrete-event loop over a scenario.

1. Event order
   - Events run in nondecreasing time; ties go by EventTag order, then by
     scheduling sequence number
   - Flow times are integer milliseconds; ledger and orchestration times are
     seconds (ms / 1000)

2. Flow lifecycle
   - FlowStart: the allocation must be Live; the route is chosen by device
     behavior; the source device records immediately
   - FlowArrival: the destination (and, with full-path recording, each hop)
     records when the flow reaches it
   - RecordSubmit: the record reaches the ledger after the processing delay

3. Determinism
   - All randomness comes from one random.Random(seed) used at setup
   - The trace, ledger and contract state are functions of (scenario, seed)
"""

import heapq
import itertools
import json
import logging
import math
import random
from typing import Any, Dict, List, Tuple

from pydantic import BaseModel, Field

from src.config.scenario import RequestEntry, ScenarioSpec
from src.database.access_control import MANAGER_ID, AccessControlDB
from src.database.models import (
    AllocationState,
    Authority,
    AuditFinding,
    BehaviorKind,
    Block,
    ContractKind,
    DisclosedPreimage,
    EventTag,
    Flow,
    FlowDisclosure,
    FlowManifest,
    LedgerConfig,
    OrchestrationEvent,
    RecordRole,
    ResourceRequest,
    RunSummary,
    ScenarioEvent,
    Verdict,
)
from src.database.network_log import NetworkLog
from src.services.audit import AuditService, Blacklist
from src.services.contracts import ContractEngine, ContractRules
from src.services.crypto.hashing import canonical_json, sha3_256
from src.services.errors import AlreadyBlacklisted, BeatError, GovernanceNotConvened, LedgerRejected
from src.services.ledger import Ledger
from src.services.orchestration import OrchestrationService
from .packet_processor import PacketProcessor, PendingRecord, ProcessingDelays
from .routing import route
from .topology import build_topology

logger = logging.getLogger(__name__)

# Upper bound on extra seals used to drain the mempool after the horizon
_SETTLE_LIMIT = 10_000


class TraceRecord(BaseModel):
    seq: int
    time: float
    event: str
    kind: str
    detail: Dict[str, Any] = Field(default_factory=dict)

    def to_line(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


class Simulation:
    def __init__(self, scenario: ScenarioSpec, seed: int = 0):
        self.scenario = scenario
        self.seed = seed
        self.rng = random.Random(seed)
        self.now = 0.0

        self._queue: List[Tuple[float, int, int, ScenarioEvent]] = []
        self._seq = itertools.count()
        self.trace: List[TraceRecord] = []

        # Participants first: devices reference their owners and vendors
        self.access = AccessControlDB()
        for participant in scenario.participants:
            self.access.create_participant(participant.kind, participant.label)
        self.topology = build_topology(
            scenario.topology_spec(),
            assign_id=self.access.assign_device_id,
            resolve_party=self.access.pdl_id_for_label,
        )

        names = scenario.ledger.authorities or [d.name for d in scenario.devices]
        self.ledger_config = LedgerConfig(
            block_interval=scenario.ledger.block_interval,
            tps_cap=scenario.ledger.tps_cap,
            mempool_cap=scenario.ledger.mempool_cap,
            batch_size=scenario.ledger.batch_size,
            max_payload=scenario.ledger.max_payload,
            authorities=[Authority(pdl_id=self.topology.device(n).pdl_id, label=n) for n in names],
        )
        self.ledger = Ledger(self.ledger_config)
        self.rules = ContractRules(
            deploy_delay=scenario.contracts.deploy_delay,
            manager_id=MANAGER_ID,
            digest_algorithm=scenario.contracts.digest_algorithm,
        )
        self.engine = ContractEngine(self.ledger, self.rules)
        self.network_log = NetworkLog(self.topology.links.values())
        self.orchestrator = OrchestrationService(
            self.access, self.ledger, self.engine, self.topology, self.network_log
        )
        self.blacklist = Blacklist(self.ledger, enabled=scenario.governance.blacklist_enabled)

        self.registry = self.engine.deploy_contract(ContractKind.FLOW_REGISTRY, None, MANAGER_ID, 0.0)
        self.delays = ProcessingDelays(
            capture_ms=scenario.network.capture_delay_ms,
            hash_ms=scenario.network.hash_delay_ms,
        )
        self.processors: Dict[str, PacketProcessor] = {
            name: PacketProcessor(device, self.engine, self.registry, self.delays, scenario.network.epoch_ms)
            for name, device in self.topology.devices.items()
        }

        self.flows: Dict[str, Flow] = {}
        self.disclosures: Dict[str, FlowDisclosure] = {}
        self.findings: List[AuditFinding] = []
        self.flows_completed = 0
        self.flows_skipped = 0
        self.records_observed = 0
        self.commit_latencies: List[float] = []
        self._requests: Dict[str, RequestEntry] = {r.id: r for r in scenario.requests}
        self._pending_records: Dict[int, Tuple[str, PendingRecord]] = {}
        self._record_submits: Dict[Tuple[str, int], float] = {}
        self._orchestration_mark = 0
        self._seals = 0

        self.ledger.add_commit_listener(self._on_commit)
        self._handlers = {
            EventTag.REQUEST_ARRIVAL: self._on_request_arrival,
            EventTag.FLOW_START: self._on_flow_start,
            EventTag.FLOW_ARRIVAL: self._on_flow_arrival,
            EventTag.RECORD_SUBMIT: self._on_record_submit,
            EventTag.SEAL_DUE: self._on_seal_due,
            EventTag.TICK: self._on_tick,
            EventTag.IP_CHANGE: self._on_ip_change,
            EventTag.BLACKLIST: self._on_blacklist,
        }
        self._schedule_initial()

    # -- scheduling -------------------------------------------------------

    def schedule(self, time: float, tag: EventTag, **payload) -> ScenarioEvent:
        event = ScenarioEvent(time=time, tag=tag, seq=next(self._seq), payload=payload)
        heapq.heappush(self._queue, (*event.sort_key, event))
        return event

    def _schedule_initial(self):
        s = self.scenario
        for request in s.requests:
            self.schedule(request.at, EventTag.REQUEST_ARRIVAL, request=request.id)

        per_request: Dict[str, int] = {}
        for entry in s.flows:
            index = per_request.get(entry.request, 0)
            per_request[entry.request] = index + 1
            flow_id = entry.id or f"{entry.request}-f{index}"
            self.schedule(entry.at_ms / 1000.0, EventTag.FLOW_START, flow=flow_id, request=entry.request, at_ms=entry.at_ms)

        # Seeded background traffic inside each request's expected lease window
        for request in s.requests:
            first = request.at + s.contracts.deploy_delay + s.traffic.margin_s
            last = request.at + s.contracts.deploy_delay + request.lease_duration - s.traffic.margin_s
            low, high = math.ceil(first * 1000), math.floor(last * 1000)
            if high < low:
                continue
            for k in range(s.traffic.flows_per_request):
                at_ms = self.rng.randint(low, high)
                self.schedule(at_ms / 1000.0, EventTag.FLOW_START, flow=f"{request.id}-g{k}", request=request.id, at_ms=at_ms)

        for change in s.ip_changes:
            self.schedule(change.at, EventTag.IP_CHANGE, device=change.device, ip=change.ip)
        for entry in s.blacklist:
            self.schedule(entry.at, EventTag.BLACKLIST, node=entry.node, reason=entry.reason)

        self.schedule(self.ledger_config.block_interval, EventTag.SEAL_DUE)
        self.schedule(0.0, EventTag.TICK, periodic=True)

    def _record(self, tag: EventTag, kind: str, **detail) -> TraceRecord:
        record = TraceRecord(seq=len(self.trace), time=self.now, event=tag.name, kind=kind, detail=detail)
        self.trace.append(record)
        return record

    # -- event loop -------------------------------------------------------

    def advance(self, until: float) -> List[TraceRecord]:
        """Process every event with time <= until; returns the new trace records"""
        if until < self.now:
            raise ValueError(f"cannot advance backwards from {self.now} to {until}")
        mark = len(self.trace)
        while self._queue and self._queue[0][0] <= until:
            *_, event = heapq.heappop(self._queue)
            self.now = event.time
            self._handlers[event.tag](event)
        self.now = until
        return self.trace[mark:]

    def run(self) -> List[AuditFinding]:
        """Run to the scenario horizon, finish flows in flight, drain the mempool, then audit"""
        self.advance(self.scenario.run.until)
        self._finish_in_flight()
        self._settle()
        self.findings = self.audit()
        if self.scenario.governance.auto_blacklist_unverifiable:
            self._auto_blacklist()
        return self.findings

    def _finish_in_flight(self):
        """Deliver flows and record submissions already under way at the horizon"""
        in_flight = (EventTag.FLOW_ARRIVAL, EventTag.RECORD_SUBMIT)
        while any(item[-1].tag in in_flight for item in self._queue):
            *_, event = heapq.heappop(self._queue)
            if event.tag not in in_flight and event.tag is not EventTag.SEAL_DUE:
                continue
            self.now = event.time
            self._handlers[event.tag](event)

    def _settle(self):
        for _ in range(_SETTLE_LIMIT):
            if self.ledger.pending_count == 0:
                return
            self.now = max(self.now, self.ledger.tip.header.seal_ts + self.ledger_config.block_interval)
            self._seal()
        logger.warning(f"[Simulation] Mempool still holds {self.ledger.pending_count} transactions")

    # -- orchestration ----------------------------------------------------

    def _drain_orchestration(self, tag: EventTag):
        events: List[OrchestrationEvent] = self.orchestrator.history[self._orchestration_mark:]
        self._orchestration_mark = len(self.orchestrator.history)
        for e in events:
            self._record(tag, e.kind, request=e.request_id, **e.detail)
            if e.kind == "Confirmed":
                allocation = self.orchestrator.allocation(e.request_id)
                self.schedule(allocation.window_start, EventTag.TICK, periodic=False)
                self.schedule(allocation.window_end, EventTag.TICK, periodic=False)

    def _on_request_arrival(self, event: ScenarioEvent):
        entry = self._requests[event.payload["request"]]
        tenant = self.access.get(self.access.pdl_id_for_label(entry.tenant))
        request = ResourceRequest(
            request_id=entry.id,
            tenant=tenant.pdl_id,
            credential=tenant.credential,
            src_device=self.topology.device(entry.src).pdl_id,
            dst_device=self.topology.device(entry.dst).pdl_id,
            bandwidth=entry.bandwidth,
            lease_duration=entry.lease_duration,
            latency_target=entry.latency_target_ms,
            submitted_at=self.now,
            price=entry.price,
            penalty_rate=entry.penalty_rate,
        )
        self.orchestrator.handle_request(request, self.now)
        self._drain_orchestration(event.tag)

    def _on_tick(self, event: ScenarioEvent):
        self.orchestrator.tick(self.now)
        self._drain_orchestration(event.tag)
        if event.payload.get("periodic"):
            self.schedule(self.now + self.scenario.network.tick_interval, EventTag.TICK, periodic=True)

    # -- flows ------------------------------------------------------------

    def _on_flow_start(self, event: ScenarioEvent):
        flow_id, request_id, at_ms = event.payload["flow"], event.payload["request"], event.payload["at_ms"]
        allocation = self.orchestrator.allocation(request_id)
        if allocation is None or allocation.state is not AllocationState.LIVE or not allocation.covers(self.now):
            self.flows_skipped += 1
            self._record(event.tag, "FlowSkipped", flow=flow_id, request=request_id)
            return

        decision = route(self.topology, allocation.path[0], allocation.path[-1])
        links = self.topology.path_links(decision.path)
        segments = [link.latency + self._hold_ms(name) for name, link in zip(decision.path, links)]
        src = self.topology.device(decision.path[0])
        dst = self.topology.device(decision.path[-1])
        flow = Flow(
            flow_id=flow_id,
            request_id=request_id,
            src_device=src.name,
            dst_device=dst.name,
            src_ip=src.ip,
            dst_ip=dst.ip,
            start_ts=at_ms,
            path=decision.path,
            agreed_path=decision.agreed_path,
            segment_latencies=segments,
            routed_by=decision.routed_by,
        )
        self.flows[flow_id] = flow

        ids = {n: self.topology.device(n).pdl_id for n in set(decision.path) | set(decision.agreed_path)}
        self.disclosures[flow_id] = FlowDisclosure(manifest=FlowManifest(
            flow_id=flow_id,
            sla_address=allocation.sla_address,
            src_device=src.pdl_id,
            dst_device=dst.pdl_id,
            path=[ids[n] for n in decision.path],
            segment_latencies=[link.latency for link in links],
            agreed_path=[ids[n] for n in decision.agreed_path],
            owners={ids[n]: self.topology.device(n).owner for n in sorted(ids)},
            routed_by=ids[decision.routed_by] if decision.routed_by else None,
        ))
        self._record(event.tag, "FlowStarted", flow=flow_id, path=decision.path, routed_by=decision.routed_by)

        self._observe(event.tag, flow, src.name, RecordRole.SOURCE, at_ms)
        t = at_ms
        for i, name in enumerate(decision.path[1:]):
            t += segments[i]
            if name == dst.name:
                self.schedule(t / 1000.0, EventTag.FLOW_ARRIVAL, flow=flow_id, device=name,
                              role=RecordRole.DESTINATION.value, at_ms=t)
            elif self.scenario.network.full_path_recording:
                self.schedule(t / 1000.0, EventTag.FLOW_ARRIVAL, flow=flow_id, device=name,
                              role=RecordRole.HOP.value, at_ms=t)
        if len(decision.path) == 1:
            self.schedule(at_ms / 1000.0, EventTag.FLOW_ARRIVAL, flow=flow_id, device=dst.name,
                          role=RecordRole.DESTINATION.value, at_ms=at_ms)

    def _hold_ms(self, name: str) -> int:
        behavior = self.topology.device(name).behavior
        return behavior.delay_ms if behavior.kind is BehaviorKind.SLOW_FORWARD else 0

    def _observe(self, tag: EventTag, flow: Flow, device_name: str, role: RecordRole, at_ms: int):
        pending = self.processors[device_name].process_flow_endpoint(flow, role, at_ms)
        self.records_observed += 1
        if pending.dropped:
            self._record(tag, "RecordDropped", flow=flow.flow_id, device=pending.device, role=role.value)
            return
        self.disclosures[flow.flow_id].preimages.append(DisclosedPreimage(
            flow_id=flow.flow_id,
            role=role,
            device=pending.device,
            digest=pending.digest,
            encoding=pending.encoding,
        ))
        key = next(self._seq)
        self._pending_records[key] = (device_name, pending)
        self.schedule(pending.submit_at, EventTag.RECORD_SUBMIT, record=key)

    def _on_flow_arrival(self, event: ScenarioEvent):
        flow = self.flows[event.payload["flow"]]
        role = RecordRole(event.payload["role"])
        self._observe(event.tag, flow, event.payload["device"], role, event.payload["at_ms"])
        if role is RecordRole.DESTINATION:
            self.flows_completed += 1
            self._record(event.tag, "FlowCompleted", flow=flow.flow_id, latency=flow.end_ts - flow.start_ts)

    def _on_record_submit(self, event: ScenarioEvent):
        device_name, pending = self._pending_records.pop(event.payload["record"])
        detail = {"flow": pending.flow_id, "device": pending.device, "role": pending.role.value}
        try:
            tx = self.processors[device_name].submit(pending, self.now)
        except LedgerRejected as e:
            self._record(event.tag, "RecordRejected", reason=e.reason.value, **detail)
            return
        except BeatError as e:
            self._record(event.tag, "RecordFailed", error=type(e).__name__, **detail)
            return
        self._record_submits[(tx.submitter, tx.nonce)] = tx.submit_ts
        self._record(event.tag, "RecordSubmitted", digest=pending.digest.hex(), nonce=tx.nonce, **detail)

    # -- ledger -----------------------------------------------------------

    def _on_commit(self, block: Block):
        for tx in block.transactions:
            submitted = self._record_submits.pop((tx.submitter, tx.nonce), None)
            if submitted is not None:
                self.commit_latencies.append(block.header.seal_ts - submitted)

    def _seal(self) -> bool:
        block = self.ledger.seal_block(self.now)
        if block is None:
            self._record(EventTag.SEAL_DUE, "NotDue")
            return False
        self._seals += 1
        self._record(
            EventTag.SEAL_DUE, "BlockSealed",
            height=block.height, sealer=block.header.sealer,
            transactions=len(block.transactions), digest=block.digest.hex(),
        )
        return True

    def _on_seal_due(self, event: ScenarioEvent):
        interval = self.ledger_config.block_interval
        if self._seal():
            self.schedule((self._seals + 1) * interval, EventTag.SEAL_DUE)
        else:
            self.schedule(self.now + interval, EventTag.SEAL_DUE)

    # -- device and governance events -------------------------------------

    def change_ip(self, device_name: str, new_ip: str, now: float) -> TraceRecord:
        """Move a device to a new address; its PDL-ID does not change"""
        device = self.topology.device(device_name)
        self.now = now
        if device.ip == new_ip:
            return self._record(EventTag.IP_CHANGE, "IpUnchanged", device=device_name, ip=new_ip)
        old_ip = device.ip
        device.ip = new_ip
        return self._record(EventTag.IP_CHANGE, "IpChanged", device=device_name, pdl_id=device.pdl_id,
                            old_ip=old_ip, ip=device.ip)

    def _on_ip_change(self, event: ScenarioEvent):
        self.change_ip(event.payload["device"], event.payload["ip"], self.now)

    def _resolve_node(self, node: str) -> str:
        if self.topology.has_device(node):
            return self.topology.device(node).pdl_id
        return self.access.pdl_id_for_label(node)

    def blacklist_node(self, pdl_id: str, reason: str, tag: EventTag = EventTag.BLACKLIST):
        try:
            self.blacklist.blacklist_node(pdl_id, reason, self.now)
        except (AlreadyBlacklisted, GovernanceNotConvened) as e:
            self._record(tag, "BlacklistRefused", node=pdl_id, error=type(e).__name__)
            return
        self._record(tag, "Blacklisted", node=pdl_id, reason=reason)
        self.orchestrator.terminate_tenant(pdl_id, reason, self.now)
        self._drain_orchestration(tag)

    def _on_blacklist(self, event: ScenarioEvent):
        self.blacklist_node(self._resolve_node(event.payload["node"]), event.payload["reason"])

    def _auto_blacklist(self):
        blamed = []
        for f in self.findings:
            if f.verdict is Verdict.UNVERIFIABLE and f.blamed and f.blamed not in blamed:
                blamed.append(f.blamed)
        for pdl_id in blamed:
            if pdl_id not in self.blacklist:
                self.blacklist_node(pdl_id, "unverifiable flow records")

    # -- results ----------------------------------------------------------

    def disclosure_list(self) -> List[FlowDisclosure]:
        return list(self.disclosures.values())

    def audit_service(self) -> AuditService:
        return AuditService(self.engine.committed, self.rules.digest_algorithm)

    def audit(self) -> List[AuditFinding]:
        return self.audit_service().audit(self.disclosure_list())

    def trace_lines(self) -> List[str]:
        return [record.to_line() for record in self.trace]

    def state_digest(self) -> str:
        trace_digest = sha3_256("\n".join(self.trace_lines()).encode("utf-8"))
        return sha3_256(canonical_json({
            "tip": self.ledger.tip.digest.hex(),
            "contracts": self.engine.state_digest().hex(),
            "trace": trace_digest.hex(),
        })).hex()

    def summary(self) -> RunSummary:
        counts = self.orchestrator.counts()
        latencies = sorted(self.commit_latencies)
        violations = [f for f in self.findings if f.verdict is Verdict.VIOLATION]
        unverifiable = [f for f in self.findings if f.verdict is Verdict.UNVERIFIABLE]
        return RunSummary(
            seed=self.seed,
            blocks_sealed=self.ledger.tip_height,
            txs_admitted=self.ledger.admitted_count,
            txs_committed=len(self.ledger.committed),
            txs_pending=self.ledger.pending_count,
            txs_rejected=dict(sorted(self.ledger.rejections.items())),
            execution_failures=len(self.engine.committed.failures),
            allocations_confirmed=counts["confirmed"],
            allocations_waitlisted=counts["waitlisted"],
            allocations_denied=counts["denied"],
            flows_completed=self.flows_completed,
            flows_skipped=self.flows_skipped,
            findings=len(violations) + len(unverifiable),
            violations=len(violations),
            unverifiable=len(unverifiable),
            penalties_total=self.audit_service().total_penalty(self.findings),
            blacklisted=self.blacklist.ids(),
            commit_latency_mean=sum(latencies) / len(latencies) if latencies else None,
            commit_latency_p95=latencies[math.ceil(0.95 * len(latencies)) - 1] if latencies else None,
            modeled_record_overhead_ms=self.delays.total_ms,
            modeled_contract_overhead_s=self.scenario.contracts.execution_overhead_s,
            state_digest=self.state_digest(),
        )
