"""
Flow Audit
----------

Checks disclosed flow preimages against the digests committed on chain and
turns each flow into a finding:

    Compliant      measured latency <= SLA target
    Violation      measured latency >  SLA target (penalty_rate owed)
    Unverifiable   a record is missing on chain or the disclosure is
                   inconsistent with itself (no penalty)

Works on a ContractState, so the same code audits a live run and a replayed
ledger dump.
"""

import logging
from typing import Iterable, List, Optional, Sequence, Set, Tuple

from pydantic import ValidationError

from src.database.models import (
    AuditFinding,
    DisclosedPreimage,
    FlowDisclosure,
    FlowPreimage,
    FlowVerification,
    RecordRole,
    SlaContract,
    SlaStatus,
    UnverifiableReason,
    Verdict,
)
from src.services.contracts import ContractState, compute_penalty
from src.services.crypto.hashing import record_digest
from src.services.errors import InvalidSlaState
from src.services.logging.sim_logger import SimLogger
from .blame import assign_blame

logger = logging.getLogger(__name__)

AUDITABLE = (SlaStatus.ACTIVE, SlaStatus.EXPIRED)


class AuditService:
    def __init__(self, state: ContractState, digest_algorithm: str = "sha3_256"):
        self.state = state
        self.digest_algorithm = digest_algorithm
        self.events = SimLogger()
        self._committed: Set[Tuple[bytes, str, RecordRole]] = {
            (entry.digest, entry.submitter, entry.role)
            for entries in state.records.values()
            for entry in entries
        }

    # -- preimage checks --------------------------------------------------

    def digest_matches(self, preimage: DisclosedPreimage) -> bool:
        try:
            encoded = preimage.encoding.encode("ascii")
        except UnicodeEncodeError:
            return False
        return record_digest(encoded, self.digest_algorithm) == preimage.digest

    def _parse(self, preimage: DisclosedPreimage) -> Optional[FlowPreimage]:
        if not self.digest_matches(preimage):
            return None
        try:
            parsed = FlowPreimage.decode(preimage.encoding)
        except (ValueError, ValidationError):
            return None
        return parsed if parsed.node_id == preimage.device else None

    def is_committed(self, preimage: DisclosedPreimage) -> bool:
        return (preimage.digest, preimage.device, preimage.role) in self._committed

    def committed_record(self, disclosure: FlowDisclosure, role: RecordRole, device: str) -> Optional[FlowPreimage]:
        """Parsed preimage for (role, device) if disclosed, consistent and on chain"""
        preimage = disclosure.preimage_for(role, device)
        if preimage is None or not self.is_committed(preimage):
            return None
        return self._parse(preimage)

    # -- operations -------------------------------------------------------

    def verify_flow(self, disclosure: FlowDisclosure) -> FlowVerification:
        """Measured latency of a flow, or the reason it cannot be verified"""
        manifest = disclosure.manifest
        source = disclosure.preimage_for(RecordRole.SOURCE, manifest.src_device)
        destination = disclosure.preimage_for(RecordRole.DESTINATION, manifest.dst_device)

        parsed = []
        for preimage in (source, destination):
            if preimage is None:
                parsed.append(None)
                continue
            item = self._parse(preimage)
            if item is None:
                return FlowVerification(reason=UnverifiableReason.DIGEST_MISMATCH)
            parsed.append(item)
        start, end = parsed
        if start and end and (start.src_ip, start.dst_ip) != (end.src_ip, end.dst_ip):
            return FlowVerification(reason=UnverifiableReason.DIGEST_MISMATCH)

        if source is None or not self.is_committed(source):
            return FlowVerification(reason=UnverifiableReason.MISSING_SOURCE_RECORD)
        if destination is None or not self.is_committed(destination):
            return FlowVerification(reason=UnverifiableReason.MISSING_DESTINATION_RECORD)
        return FlowVerification(latency=end.timestamp - start.timestamp)

    def assign_blame(self, finding: AuditFinding, disclosure: FlowDisclosure) -> Optional[str]:
        return assign_blame(finding, disclosure, self.committed_record, self.digest_matches)

    def judge(self, sla: SlaContract, disclosure: FlowDisclosure) -> AuditFinding:
        """One finding for one flow under an SLA"""
        verification = self.verify_flow(disclosure)
        base = {
            "flow_id": disclosure.manifest.flow_id,
            "sla_address": sla.address,
            "latency_target": sla.latency_target,
        }
        if verification.verified and verification.latency <= sla.latency_target:
            return AuditFinding(measured_latency=verification.latency, verdict=Verdict.COMPLIANT, **base)

        if verification.verified:
            draft = AuditFinding.model_construct(
                measured_latency=verification.latency, verdict=Verdict.VIOLATION, reason=None, **base
            )
            penalty = compute_penalty(sla, 1)
        else:
            draft = AuditFinding.model_construct(
                measured_latency=None, verdict=Verdict.UNVERIFIABLE, reason=verification.reason, **base
            )
            penalty = 0.0
        finding = AuditFinding(
            measured_latency=draft.measured_latency,
            verdict=draft.verdict,
            reason=draft.reason,
            blamed=self.assign_blame(draft, disclosure),
            penalty=penalty,
            **base,
        )
        self.events.finding(finding.model_dump(mode="json"))
        return finding

    def detect_violations(self, sla: SlaContract, disclosures: Iterable[FlowDisclosure]) -> List[AuditFinding]:
        """One finding per disclosed flow under the given SLA"""
        if sla.status not in AUDITABLE:
            raise InvalidSlaState(f"SLA {sla.address} is {sla.status.value}; audits need Active or Expired")
        return [self.judge(sla, d) for d in disclosures if d.manifest.sla_address == sla.address]

    def audit(self, disclosures: Sequence[FlowDisclosure]) -> List[AuditFinding]:
        """Findings for every flow whose SLA is auditable, in disclosure order"""
        findings = []
        skipped = 0
        for disclosure in disclosures:
            sla = self.state.slas.get(disclosure.manifest.sla_address)
            if sla is None or sla.status not in AUDITABLE:
                skipped += 1
                continue
            findings.append(self.judge(sla, disclosure))

        self.events.audit_event("audit complete", {
            "flows": len(disclosures),
            "skipped": skipped,
            "violations": sum(1 for f in findings if f.verdict is Verdict.VIOLATION),
            "unverifiable": sum(1 for f in findings if f.verdict is Verdict.UNVERIFIABLE)
        })
        return findings

    def total_penalty(self, findings: Iterable[AuditFinding]) -> float:
        """Sum of compute_penalty over each SLA's violation count"""
        per_sla = {}
        for f in findings:
            if f.verdict is Verdict.VIOLATION:
                per_sla[f.sla_address] = per_sla.get(f.sla_address, 0) + 1
        return sum(compute_penalty(self.state.slas[address], count) for address, count in sorted(per_sla.items()))
