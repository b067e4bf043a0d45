import statistics

import pytest
from pydantic import ValidationError

from src.config.scenario import BlacklistEntrySpec, FlowEntry
from src.database.models import AllocationState, EventTag, SlaStatus, Verdict
from src.services.ledger import verify_chain
from src.services.network.simulator import Simulation


@pytest.fixture
def triangle(demo_scenario):
    return demo_scenario("demo_triangle")


def test_same_seed_same_run(triangle):
    first, second = Simulation(triangle, seed=42), Simulation(triangle, seed=42)
    first.run()
    second.run()

    assert first.trace_lines() == second.trace_lines()
    assert first.state_digest() == second.state_digest()
    assert first.summary() == second.summary()


def test_different_seed_changes_traffic(triangle):
    first, second = Simulation(triangle, seed=1), Simulation(triangle, seed=2)
    first.run()
    second.run()
    assert first.trace_lines() != second.trace_lines()


def test_demo_run_totals(triangle):
    sim = Simulation(triangle, seed=0)
    findings = sim.run()
    summary = sim.summary()

    assert summary.allocations_confirmed == 2
    assert summary.allocations_waitlisted == 1
    assert summary.allocations_denied == 0
    assert summary.flows_completed == 14
    assert summary.flows_skipped == 12
    assert summary.txs_pending == 0
    assert summary.execution_failures == 0
    assert (summary.violations, summary.unverifiable, summary.findings) == (0, 0, 0)
    assert len(findings) == 14
    assert verify_chain(sim.ledger.chain, sim.ledger.authority_ids).valid


def test_waitlisted_request_starts_after_release(triangle):
    sim = Simulation(triangle, seed=0)
    sim.run()

    first, second = sim.orchestrator.allocation("req-1"), sim.orchestrator.allocation("req-2")
    assert first.window == (14.0, 134.0)
    assert second.window == (148.0, 208.0)
    assert first.state is AllocationState.EXPIRED
    assert second.state is AllocationState.EXPIRED
    assert sim.engine.committed.slas[second.sla_address].status is SlaStatus.EXPIRED


def test_active_slas_track_live_allocations(triangle):
    sim = Simulation(triangle, seed=0)
    for t in range(0, 241, 2):
        sim.advance(float(t))
        assert sim.engine.active_sla_count() == len(sim.orchestrator.live_allocations()), t


def test_trace_is_time_ordered(triangle):
    sim = Simulation(triangle, seed=5)
    sim.run()
    times = [record.time for record in sim.trace]
    assert times == sorted(times)
    assert [record.seq for record in sim.trace] == list(range(len(sim.trace)))


def test_advance_is_incremental(triangle):
    sim = Simulation(triangle, seed=0)
    assert sim.advance(100.0)
    assert sim.advance(100.0) == []
    with pytest.raises(ValueError):
        sim.advance(50.0)


def test_seeded_traffic_ids(triangle):
    sim = Simulation(triangle, seed=0)
    sim.run()
    started = [r.detail["flow"] for r in sim.trace if r.kind in ("FlowStarted", "FlowSkipped")]
    assert sum(1 for f in started if f.startswith("req-1-g")) == 12
    assert {"req-1-f0", "req-1-f1"} <= set(started)


def test_ip_change_keeps_pdl_id(triangle):
    sim = Simulation(triangle, seed=0)
    before = sim.topology.device("R3").pdl_id
    sim.advance(95.0)

    device = sim.topology.device("R3")
    assert device.ip == "192.168.1.33"
    assert device.pdl_id == before
    assert any(r.kind == "IpChanged" for r in sim.trace)

    assert sim.change_ip("R3", "192.168.1.33", sim.now).kind == "IpUnchanged"
    with pytest.raises(ValidationError):
        sim.change_ip("R3", "not-an-ip", sim.now)


def test_blacklisted_device_records_are_rejected(triangle):
    scenario = triangle.model_copy(update={"blacklist": [BlacklistEntrySpec(node="R1", at=50.0)]})
    sim = Simulation(scenario, seed=0)
    findings = {f.flow_id: f for f in sim.run()}

    rejected = [r for r in sim.trace if r.kind == "RecordRejected"]
    assert rejected and all(r.detail["reason"] == "Unauthorized" for r in rejected)
    assert findings["req-1-f0"].verdict.value == "Compliant"
    assert findings["req-1-f1"].reason.value == "MissingSourceRecord"
    assert findings["req-1-f1"].blamed == "pdl-0006"
    assert sim.summary().blacklisted == ["pdl-0006"]


def test_blacklisted_tenant_loses_allocations(triangle):
    scenario = triangle.model_copy(update={"blacklist": [BlacklistEntrySpec(node="acme", at=50.0)]})
    sim = Simulation(scenario, seed=0)
    findings = sim.run()
    summary = sim.summary()

    assert sim.orchestrator.allocation("req-1").state is AllocationState.TERMINATED
    assert summary.allocations_denied == 1
    assert summary.blacklisted == ["pdl-0003"]
    # Terminated SLAs are not audited
    assert findings == []


def test_blacklist_needs_governance(triangle):
    governance = triangle.governance.model_copy(update={"blacklist_enabled": False})
    scenario = triangle.model_copy(update={
        "governance": governance,
        "blacklist": [BlacklistEntrySpec(node="R1", at=50.0)],
    })
    sim = Simulation(scenario, seed=0)
    sim.run()

    refused = [r for r in sim.trace if r.kind == "BlacklistRefused"]
    assert [r.detail["error"] for r in refused] == ["GovernanceNotConvened"]
    assert refused[0].event == EventTag.BLACKLIST.name
    assert sim.summary().blacklisted == []


def test_summary_overheads_and_latencies(triangle):
    sim = Simulation(triangle, seed=0)
    sim.run()
    summary = sim.summary()

    assert summary.modeled_record_overhead_ms == pytest.approx(0.96)
    assert summary.modeled_contract_overhead_s == 4.0
    assert 0 < summary.commit_latency_mean <= 15.0
    assert 0 < summary.commit_latency_p95 <= 15.0


def test_flow_crossing_horizon_is_delivered(triangle):
    scenario = triangle.model_copy(update={
        "run": triangle.run.model_copy(update={"until": 100.0}),
        "traffic": triangle.traffic.model_copy(update={"flows_per_request": 0}),
        "flows": [FlowEntry(request="req-1", at_ms=99_995)],
        "governance": triangle.governance.model_copy(update={"auto_blacklist_unverifiable": True}),
    })
    sim = Simulation(scenario, seed=0)
    [finding] = sim.run()

    assert finding.verdict is Verdict.COMPLIANT
    assert finding.measured_latency == 10
    assert sim.summary().flows_completed == 1
    assert sim.summary().txs_pending == 0
    assert sim.summary().blacklisted == []


def test_record_commit_latency_under_load(triangle):
    scenario = triangle.model_copy(update={
        "traffic": triangle.traffic.model_copy(update={"flows_per_request": 200}),
    })
    sim = Simulation(scenario, seed=3)
    sim.run()
    latencies = sim.commit_latencies

    assert len(latencies) > 300
    assert max(latencies) <= 15.0
    assert statistics.mean(latencies) == pytest.approx(7.5, abs=1.0)
