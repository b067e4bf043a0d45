"""Deterministic blame rules for non-compliant flows.

Rules, first match wins:

- Unverifiable, missing record        -> the device that owed the record
- Unverifiable, digest mismatch       -> device of the first preimage that
                                         fails its own digest, else destination
- Violation on a diverted path        -> owner of the device that diverted
                                         (manifest routed_by, else the hop
                                         before the first difference)
- Violation, hop records for the path -> device that sent the first segment
                                         whose recorded delta exceeds its link
- Violation otherwise                 -> owner of the upstream device of the
                                         highest-latency link (tie: lowest id)
"""

from typing import Callable, List, Optional

from src.database.models import (
    AuditFinding,
    FlowDisclosure,
    FlowPreimage,
    RecordRole,
    UnverifiableReason,
    Verdict,
)

# (disclosure, role, device) -> parsed preimage when its digest is committed
RecordCheck = Callable[[FlowDisclosure, RecordRole, str], Optional[FlowPreimage]]


def _diverted_by(path: List[str], agreed: List[str]) -> Optional[str]:
    # Both paths start at the source, so the first difference has a predecessor
    for i, (taken, expected) in enumerate(zip(path, agreed)):
        if taken != expected:
            return path[i - 1]
    return None


def _hop_blame(disclosure: FlowDisclosure, checked: RecordCheck) -> Optional[str]:
    manifest = disclosure.manifest
    timestamps = []
    for i, device in enumerate(manifest.path):
        if i == 0:
            role = RecordRole.SOURCE
        elif i == len(manifest.path) - 1:
            role = RecordRole.DESTINATION
        else:
            role = RecordRole.HOP
        preimage = checked(disclosure, role, device)
        if preimage is None:
            return None
        timestamps.append(preimage.timestamp)

    for i, budget in enumerate(manifest.segment_latencies):
        if timestamps[i + 1] - timestamps[i] > budget:
            return manifest.path[i]
    return None


def _longest_link_owner(disclosure: FlowDisclosure) -> str:
    manifest = disclosure.manifest
    if not manifest.segment_latencies:
        return manifest.owners.get(manifest.src_device, manifest.src_device)
    worst = max(manifest.segment_latencies)
    upstream = min(
        manifest.path[i] for i, latency in enumerate(manifest.segment_latencies) if latency == worst
    )
    return manifest.owners.get(upstream, upstream)


def _mismatched_device(disclosure: FlowDisclosure, digest_matches: Callable) -> str:
    for preimage in disclosure.preimages:
        if not digest_matches(preimage):
            return preimage.device
    return disclosure.manifest.dst_device


def assign_blame(
    finding: AuditFinding,
    disclosure: FlowDisclosure,
    checked: RecordCheck,
    digest_matches: Callable,
) -> Optional[str]:
    """Name the party responsible for a Violation or Unverifiable finding"""
    manifest = disclosure.manifest
    if finding.verdict is Verdict.COMPLIANT:
        return None

    if finding.verdict is Verdict.UNVERIFIABLE:
        if finding.reason is UnverifiableReason.MISSING_SOURCE_RECORD:
            return manifest.src_device
        if finding.reason is UnverifiableReason.MISSING_DESTINATION_RECORD:
            return manifest.dst_device
        return _mismatched_device(disclosure, digest_matches)

    router = None
    if manifest.path != manifest.agreed_path:
        router = manifest.routed_by or _diverted_by(manifest.path, manifest.agreed_path)
    if router is not None:
        return manifest.owners.get(router, router)

    hop = _hop_blame(disclosure, checked)
    if hop is not None:
        return hop
    return _longest_link_owner(disclosure)
