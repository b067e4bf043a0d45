"""
Orchestration Manager
---------------------

Admits resource requests against the network log, deploys one SLA per
confirmed allocation and drives the SLA lifecycle from periodic ticks.

Request pipeline (stops at the first outcome):

1. Tenant agreement check          -> Denied(NoAgreement)
2. Agreed path (min latency)       -> Denied(NoPath)
3. Waitlist non-empty              -> Waitlisted (FIFO, no overtaking)
4. Capacity over the lease window  -> Waitlisted
5. SLA deployment                  -> Denied(LedgerRejected) or Confirmed

A confirmed allocation is Reserved until its lease starts; the tick at lease
start initializes the SLA and makes it Live. Live allocations and Active SLAs
always correspond one to one.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

from src.database.access_control import AccessControlDB
from src.database.models import (
    Allocation,
    AllocationState,
    ContractKind,
    DenyReason,
    OrchestrationEvent,
    Participant,
    ParticipantKind,
    RequestOutcome,
    RequestStatus,
    ResourceRequest,
    SlaTerms,
)
from src.database.network_log import NetworkLog
from src.services.contracts import ContractEngine
from src.services.errors import BeatError, LedgerRejected, NoPath, UnknownDevice
from src.services.ledger import Ledger
from src.services.logging.sim_logger import SimLogger
from src.services.network.routing import honest_path
from src.services.network.topology import Topology

logger = logging.getLogger(__name__)


class OrchestrationService:
    def __init__(
        self,
        access: AccessControlDB,
        ledger: Ledger,
        engine: ContractEngine,
        topology: Topology,
        network_log: NetworkLog,
    ):
        self.access = access
        self.ledger = ledger
        self.engine = engine
        self.topology = topology
        self.network_log = network_log
        self.manager_id = engine.rules.manager_id
        self.events = SimLogger()

        self.requests: Dict[str, ResourceRequest] = {}
        self.allocations: Dict[str, Allocation] = {}
        self.history: List[OrchestrationEvent] = []

        # The manager and every participant or device known so far may submit
        self.ledger.register(self.manager_id)
        for participant in access.participants():
            if participant.can_submit:
                self.ledger.register(participant.pdl_id)
        for device in topology.devices.values():
            self.ledger.register(device.pdl_id)

    # -- registration -----------------------------------------------------

    def register_participant(self, kind: ParticipantKind, label: str) -> Participant:
        """Register a participant; every kind except Regulator gains submit rights"""
        participant = self.access.create_participant(kind, label)
        if participant.can_submit:
            self.ledger.register(participant.pdl_id)
        self.events.orchestration_event("participant registered", {
            "label": label,
            "kind": kind.value,
            "pdl_id": participant.pdl_id
        })
        return participant

    def assign_pdl_id(self, device_name: str) -> str:
        """Return the device's PDL-ID; stable across IP changes"""
        if not self.topology.has_device(device_name):
            raise UnknownDevice(f"unknown device: {device_name}")
        pdl_id = self.access.assign_device_id(device_name)
        self.ledger.register(pdl_id)
        return pdl_id

    # -- events -----------------------------------------------------------

    def _emit(self, now: float, kind: str, request_id: str, **detail) -> OrchestrationEvent:
        event = OrchestrationEvent(time=now, kind=kind, request_id=request_id, detail=detail)
        self.history.append(event)
        self.events.orchestration_event(kind, {"request_id": request_id, "time": now, **detail})
        return event

    # -- admission --------------------------------------------------------

    def _agreed_path(self, request: ResourceRequest) -> List[str]:
        src = self.topology.device_by_pdl_id(request.src_device)
        dst = self.topology.device_by_pdl_id(request.dst_device)
        return honest_path(self.topology, src.name, dst.name)

    def _eligible(self, request: ResourceRequest) -> bool:
        return (
            self.access.verify(request.tenant, request.credential)
            and self.access.has_agreement(request.tenant)
            and self.ledger.is_permitted(request.tenant)
        )

    def _deny(self, request: ResourceRequest, reason: DenyReason, now: float) -> RequestOutcome:
        self._emit(now, "Denied", request.request_id, reason=reason.value)
        return RequestOutcome(request_id=request.request_id, status=RequestStatus.DENIED, reason=reason)

    def _waitlist(self, request: ResourceRequest, now: float) -> RequestOutcome:
        self.network_log.waitlist.append(request)
        self._emit(now, "Waitlisted", request.request_id, position=len(self.network_log.waitlist))
        return RequestOutcome(request_id=request.request_id, status=RequestStatus.WAITLISTED)

    @staticmethod
    def _terms(request: ResourceRequest) -> SlaTerms:
        return SlaTerms(
            lease_duration=request.lease_duration,
            price=request.price,
            latency_target=request.latency_target,
            penalty_rate=request.penalty_rate,
        )

    def _try_confirm(self, request: ResourceRequest, path: List[str], now: float) -> Optional[RequestOutcome]:
        """Reserve capacity and deploy the SLA; None means not enough capacity"""
        links = [link.link_id for link in self.topology.path_links(path)]
        start = now + self.engine.rules.deploy_delay
        end = start + request.lease_duration
        if self.network_log.query_capacity(links, start, end) < request.bandwidth:
            return None

        try:
            address = self.engine.deploy_contract(
                ContractKind.SLA, self._terms(request).model_dump(), self.manager_id, now
            )
        except LedgerRejected:
            return self._deny(request, DenyReason.LEDGER_REJECTED, now)

        allocation = Allocation(
            request_id=request.request_id,
            tenant=request.tenant,
            path=path,
            links=links,
            bandwidth=request.bandwidth,
            sla_address=address,
            window_start=start,
            window_end=end,
        )
        devices = [self.topology.device(name).pdl_id for name in path]
        self.network_log.commit(request.request_id, links, devices, request.bandwidth, start, end)
        self.allocations[request.request_id] = allocation
        self._emit(now, "Confirmed", request.request_id, sla=address, window=[start, end], path=path)
        return RequestOutcome(request_id=request.request_id, status=RequestStatus.CONFIRMED, allocation=allocation)

    def handle_request(self, request: ResourceRequest, now: float) -> RequestOutcome:
        """Run a resource request through the admission pipeline"""
        self.requests[request.request_id] = request
        if not self._eligible(request):
            return self._deny(request, DenyReason.NO_AGREEMENT, now)
        try:
            path = self._agreed_path(request)
        except (NoPath, UnknownDevice):
            return self._deny(request, DenyReason.NO_PATH, now)

        if self.network_log.waitlist:
            return self._waitlist(request, now)
        outcome = self._try_confirm(request, path, now)
        return outcome or self._waitlist(request, now)

    def query_capacity(self, path: Sequence[str], window: Tuple[float, float]) -> float:
        """Remaining capacity along a path of device names over [start, end)"""
        links = [link.link_id for link in self.topology.path_links(path)]
        return self.network_log.query_capacity(links, window[0], window[1])

    # -- lifecycle --------------------------------------------------------

    def _owner_of(self, allocation: Allocation) -> str:
        return self.topology.device(allocation.path[0]).owner

    def _activate(self, allocation: Allocation, now: float) -> Optional[OrchestrationEvent]:
        request = self.requests[allocation.request_id]
        if now >= allocation.window_end:
            self.network_log.release(allocation.request_id, now)
            allocation.state = AllocationState.CANCELLED
            return self._emit(now, "Cancelled", allocation.request_id, sla=allocation.sla_address)
        try:
            self.engine.init_sla(
                allocation.sla_address,
                owner=self._owner_of(allocation),
                tenant=allocation.tenant,
                terms=self._terms(request),
                now=now,
                lease_start=allocation.window_start,
            )
        except BeatError as e:
            # Retried on the next tick until the window closes
            return self._emit(now, "ActivationDeferred", allocation.request_id, error=str(e))
        allocation.state = AllocationState.LIVE
        return self._emit(now, "Activated", allocation.request_id, sla=allocation.sla_address)

    def _expire(self, allocation: Allocation, now: float) -> OrchestrationEvent:
        try:
            self.engine.expire_sla(allocation.sla_address, now)
        except BeatError as e:
            return self._emit(now, "ExpiryDeferred", allocation.request_id, error=str(e))
        self.network_log.release(allocation.request_id, now)
        allocation.state = AllocationState.EXPIRED
        return self._emit(now, "Expired", allocation.request_id, sla=allocation.sla_address)

    def _drain_waitlist(self, now: float) -> List[OrchestrationEvent]:
        mark = len(self.history)
        waitlist = self.network_log.waitlist
        while (head := self.network_log.waitlist_head()) is not None:
            if not self._eligible(head):
                waitlist.popleft()
                self._deny(head, DenyReason.NO_AGREEMENT, now)
                continue
            try:
                path = self._agreed_path(head)
            except (NoPath, UnknownDevice):
                waitlist.popleft()
                self._deny(head, DenyReason.NO_PATH, now)
                continue
            if self._try_confirm(head, path, now) is None:
                break
            waitlist.popleft()
        return self.history[mark:]

    def tick(self, now: float) -> List[OrchestrationEvent]:
        """Activate due allocations, expire ended ones, then serve the waitlist"""
        emitted: List[OrchestrationEvent] = []
        ordered = sorted(self.allocations.values(), key=lambda a: (a.window_start, a.request_id))

        for allocation in ordered:
            if allocation.state is AllocationState.RESERVED and now >= allocation.window_start:
                emitted.append(self._activate(allocation, now))
        for allocation in ordered:
            if allocation.state is AllocationState.LIVE and now >= allocation.window_end:
                emitted.append(self._expire(allocation, now))

        emitted.extend(self._drain_waitlist(now))
        return emitted

    def terminate_tenant(self, tenant: str, reason: str, now: float) -> List[OrchestrationEvent]:
        """End every open allocation of a tenant, e.g. after blacklisting"""
        emitted = []
        for allocation in sorted(self.allocations.values(), key=lambda a: a.request_id):
            if allocation.tenant != tenant:
                continue
            if allocation.state is AllocationState.LIVE:
                try:
                    self.engine.terminate_sla(allocation.sla_address, reason, now)
                except BeatError as e:
                    emitted.append(self._emit(now, "TerminationDeferred", allocation.request_id, error=str(e)))
                    continue
                allocation.state = AllocationState.TERMINATED
                self.network_log.release(allocation.request_id, now)
                emitted.append(self._emit(now, "Terminated", allocation.request_id, reason=reason))
            elif allocation.state is AllocationState.RESERVED:
                allocation.state = AllocationState.CANCELLED
                self.network_log.release(allocation.request_id, now)
                emitted.append(self._emit(now, "Cancelled", allocation.request_id, reason=reason))
        return emitted

    # -- queries ----------------------------------------------------------

    def allocation(self, request_id: str) -> Optional[Allocation]:
        return self.allocations.get(request_id)

    def live_allocations(self) -> List[Allocation]:
        return [a for a in self.allocations.values() if a.state is AllocationState.LIVE]

    def counts(self) -> Dict[str, int]:
        kinds = [e.kind for e in self.history]
        return {
            "confirmed": kinds.count("Confirmed"),
            "waitlisted": len({e.request_id for e in self.history if e.kind == "Waitlisted"}),
            "denied": kinds.count("Denied"),
        }
