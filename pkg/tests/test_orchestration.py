import random

import pytest

from src.database.models import (
    AllocationState,
    DenyReason,
    ParticipantKind,
    RequestStatus,
    ResourceRequest,
    SlaStatus,
)
from src.services.errors import UnknownDevice
from src.services.network.topology import DeviceSpec


def _active_matches_live(stack):
    assert stack.engine.active_sla_count() == len(stack.orchestrator.live_allocations())


def test_confirmed_request_reserves_agreed_path(stack, make_request):
    outcome = stack.orchestrator.handle_request(make_request("a"), 0.0)

    assert outcome.status is RequestStatus.CONFIRMED
    allocation = outcome.allocation
    assert allocation.path == ["R1", "R2", "R3"]
    assert allocation.window == (14.0, 114.0)
    assert allocation.state is AllocationState.RESERVED
    assert stack.engine.sla(allocation.sla_address).status is SlaStatus.PENDING
    assert stack.orchestrator.query_capacity(["R1", "R2", "R3"], (14.0, 114.0)) == 60
    _active_matches_live(stack)


def test_tick_activates_then_expires(stack, make_request):
    allocation = stack.orchestrator.handle_request(make_request("a"), 0.0).allocation

    kinds = [e.kind for e in stack.orchestrator.tick(14.0)]
    assert kinds == ["Activated"]
    assert allocation.state is AllocationState.LIVE
    sla = stack.engine.sla(allocation.sla_address)
    assert (sla.lease_start, sla.lease_end) == (14.0, 114.0)
    _active_matches_live(stack)

    assert stack.orchestrator.tick(60.0) == []

    kinds = [e.kind for e in stack.orchestrator.tick(114.0)]
    assert kinds == ["Expired"]
    assert allocation.state is AllocationState.EXPIRED
    assert stack.engine.sla(allocation.sla_address).status is SlaStatus.EXPIRED
    assert stack.network_log.load_at("R1-R2", 114.0) == 0
    assert stack.network_log.load_at("R1-R2", 50.0) == 40
    _active_matches_live(stack)


def test_owner_without_agreement_is_denied(stack, make_request):
    outcome = stack.orchestrator.handle_request(make_request("a", tenant="edge-co"), 0.0)
    assert outcome.status is RequestStatus.DENIED
    assert outcome.reason is DenyReason.NO_AGREEMENT


def test_unknown_tenant_is_denied(stack, make_request):
    outcome = stack.orchestrator.handle_request(make_request("a", tenant="pdl-0999"), 0.0)
    assert outcome.reason is DenyReason.NO_AGREEMENT


def test_wrong_credential_is_denied(stack, make_request):
    outcome = stack.orchestrator.handle_request(make_request("a", credential="not-the-token"), 0.0)
    assert outcome.status is RequestStatus.DENIED
    assert outcome.reason is DenyReason.NO_AGREEMENT
    assert stack.network_log.query_capacity(["R1-R2", "R2-R3"], 14.0, 114.0) == 100


def test_unreachable_destination_is_denied(build_stack):
    stack = build_stack(extra_devices=[DeviceSpec(name="R4", ip="10.0.0.4", owner="edge-co", vendor="vendor")])
    request = ResourceRequest(
        request_id="a",
        tenant=stack.access.pdl_id_for_label("acme"),
        credential=stack.access.get_by_label("acme").credential,
        src_device=stack.topology.device("R1").pdl_id,
        dst_device=stack.topology.device("R4").pdl_id,
        bandwidth=10,
        lease_duration=60,
        latency_target=15,
        submitted_at=0,
    )
    outcome = stack.orchestrator.handle_request(request, 0.0)
    assert outcome.reason is DenyReason.NO_PATH


def test_waitlist_serves_in_arrival_order(stack, make_request):
    orchestrator = stack.orchestrator
    assert orchestrator.handle_request(make_request("a", bandwidth=60), 0.0).status is RequestStatus.CONFIRMED
    assert orchestrator.handle_request(make_request("b", bandwidth=60), 1.0).status is RequestStatus.WAITLISTED
    # Would fit, but may not overtake the waitlist head
    assert orchestrator.handle_request(make_request("c", bandwidth=10), 2.0).status is RequestStatus.WAITLISTED

    orchestrator.tick(14.0)
    assert [r.request_id for r in stack.network_log.waitlist] == ["b", "c"]
    assert stack.network_log.waitlist_head().request_id == "b"

    orchestrator.tick(114.0)
    confirmed = [e.request_id for e in orchestrator.history if e.kind == "Confirmed"]
    assert confirmed == ["a", "b", "c"]
    assert not stack.network_log.waitlist
    assert stack.network_log.waitlist_head() is None
    assert orchestrator.allocation("b").window == (128.0, 228.0)
    assert orchestrator.counts() == {"confirmed": 3, "waitlisted": 2, "denied": 0}


def test_capacity_never_exceeded(stack, make_request):
    for i in range(6):
        stack.orchestrator.handle_request(make_request(f"r{i}", bandwidth=30), float(i))
    for t in (14.0, 19.0, 60.0, 114.0, 130.0):
        stack.orchestrator.tick(t)
        for link_id in stack.network_log.link_ids():
            assert stack.network_log.load_at(link_id, t) <= stack.network_log.capacity[link_id]


def test_late_registered_tenant_can_lease(stack, make_request):
    tenant = stack.orchestrator.register_participant(ParticipantKind.OWNER_TENANT, "city-iot")

    assert stack.ledger.is_permitted(tenant.pdl_id)
    outcome = stack.orchestrator.handle_request(make_request("a", tenant="city-iot"), 0.0)
    assert outcome.status is RequestStatus.CONFIRMED


def test_regulator_is_not_a_submitter(stack):
    regulator = stack.access.get_by_label("regulator")
    assert not stack.ledger.is_permitted(regulator.pdl_id)


def test_device_ids_are_stable(stack):
    assert stack.orchestrator.assign_pdl_id("R2") == stack.orchestrator.assign_pdl_id("R2") == "pdl-0007"
    with pytest.raises(UnknownDevice):
        stack.orchestrator.assign_pdl_id("R9")


def test_terminate_tenant_ends_live_and_reserved(stack, make_request):
    orchestrator = stack.orchestrator
    live = orchestrator.handle_request(make_request("a"), 0.0).allocation
    orchestrator.tick(14.0)
    reserved = orchestrator.handle_request(make_request("b", src="R2"), 20.0).allocation

    acme = stack.access.pdl_id_for_label("acme")
    kinds = [e.kind for e in orchestrator.terminate_tenant(acme, "blacklisted", 30.0)]

    assert kinds == ["Terminated", "Cancelled"]
    assert live.state is AllocationState.TERMINATED
    assert reserved.state is AllocationState.CANCELLED
    assert stack.engine.sla(live.sla_address).status is SlaStatus.TERMINATED
    assert stack.network_log.load_at("R1-R2", 30.0) == 0
    _active_matches_live(stack)


def fifo_oracle(arrivals, horizon, capacity=100.0, delay=14.0):
    """Confirmations of a strict FIFO queue in front of one bottleneck link.

    arrivals maps a second to the (request_id, bandwidth, lease) tuples arriving then.
    """
    reservations, queue, confirmed = [], [], []

    def confirm(request_id, bandwidth, lease, now):
        start, end = now + delay, now + delay + lease
        instants = {start} | {s for _, s, _ in reservations if start < s < end}
        if any(bandwidth + sum(b for b, s, e in reservations if s <= t < e) > capacity for t in instants):
            return False
        reservations.append((bandwidth, start, end))
        confirmed.append((request_id, (start, end)))
        return True

    for now in range(horizon):
        for request in arrivals.get(now, []):
            if queue or not confirm(*request, float(now)):
                queue.append(request)
        while queue and confirm(*queue[0], float(now)):
            queue.pop(0)
    return confirmed


def test_random_schedules_keep_fifo_and_capacity(build_stack):
    rng = random.Random(17)
    horizon = 320
    for trial in range(200):
        stack = build_stack()
        acme = stack.access.get_by_label("acme")
        arrivals = {}
        for i in range(rng.randint(2, 6)):
            request = (f"r{i}", float(rng.randrange(10, 101, 10)), float(rng.randint(10, 40)))
            arrivals.setdefault(rng.randint(0, 40), []).append(request)

        for now in range(horizon):
            for request_id, bandwidth, lease in arrivals.get(now, []):
                stack.orchestrator.handle_request(ResourceRequest(
                    request_id=request_id,
                    tenant=acme.pdl_id,
                    credential=acme.credential,
                    src_device=stack.topology.device("R1").pdl_id,
                    dst_device=stack.topology.device("R3").pdl_id,
                    bandwidth=bandwidth,
                    lease_duration=lease,
                    latency_target=15.0,
                    submitted_at=float(now),
                ), float(now))
            stack.orchestrator.tick(float(now))

        assert stack.network_log.waitlist_head() is None, trial
        for link_id in stack.network_log.link_ids():
            capacity = stack.network_log.capacity[link_id]
            assert all(stack.network_log.load_at(link_id, t) <= capacity for t in range(horizon)), trial

        confirmed = [e.request_id for e in stack.orchestrator.history if e.kind == "Confirmed"]
        expected = fifo_oracle(arrivals, horizon)
        assert confirmed == [request_id for request_id, _ in expected], trial
        for request_id, window in expected:
            assert stack.orchestrator.allocation(request_id).window == window, trial
