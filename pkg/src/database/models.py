import ipaddress
from enum import Enum, IntEnum
from typing import Annotated, Any, Dict, List, Optional, Tuple

from pydantic import (
    AfterValidator,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    field_validator,
    model_validator,
)

from src.services.crypto.hashing import DIGEST_SIZE, canonical_json, sha3_256


def _from_hex(value: Any) -> Any:
    if isinstance(value, str):
        return bytes.fromhex(value)
    return value


def _dotted_quad(value: str) -> str:
    return str(ipaddress.IPv4Address(value))


# Bytes that travel as lowercase hex in JSON artifacts
HexBytes = Annotated[
    bytes,
    BeforeValidator(_from_hex),
    PlainSerializer(lambda v: v.hex(), return_type=str, when_used="json"),
]
IPv4 = Annotated[str, AfterValidator(_dotted_quad)]


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------

class RejectReason(str, Enum):
    UNAUTHORIZED = "Unauthorized"
    BAD_NONCE = "BadNonce"
    RATE_CAPPED = "RateCapped"
    MEMPOOL_FULL = "MempoolFull"


class ChainCheck(str, Enum):
    EMPTY = "empty"
    HEIGHT = "height"
    PARENT_DIGEST = "parent_digest"
    TX_DIGEST = "tx_digest"
    SEALER_MEMBERSHIP = "sealer_membership"
    SEALER_ROTATION = "sealer_rotation"
    HEADER_DIGEST = "header_digest"
    MALFORMED = "malformed"


class Authority(BaseModel):
    """A ledger node allowed to seal blocks"""
    model_config = ConfigDict(frozen=True)

    pdl_id: str
    label: str


class Transaction(BaseModel):
    """A submitted contract call"""
    model_config = ConfigDict(frozen=True)

    submitter: str
    contract: str
    payload: HexBytes
    nonce: int = Field(ge=0)
    submit_ts: float = Field(ge=0)

    def encode(self) -> bytes:
        return canonical_json(self.model_dump(mode="json"))

    def digest(self) -> bytes:
        return sha3_256(self.encode())


def transactions_digest(transactions) -> bytes:
    """Digest over the ordered transactions of a block"""
    return sha3_256(b"".join(tx.digest() for tx in transactions))


class BlockHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    height: int = Field(ge=0)
    parent_digest: HexBytes
    sealer: str
    seal_ts: float
    tx_digest: HexBytes

    def digest(self) -> bytes:
        return sha3_256(canonical_json(self.model_dump(mode="json")))


class Block(BaseModel):
    """Sealed block: header, ordered transactions and the stored header digest"""
    model_config = ConfigDict(frozen=True)

    header: BlockHeader
    transactions: Tuple[Transaction, ...] = ()
    digest: HexBytes

    @property
    def height(self) -> int:
        return self.header.height


class LedgerConfig(BaseModel):
    """Cadence, throughput limits and the authority set"""
    block_interval: float = Field(default=15.0, gt=0)
    tps_cap: int = Field(default=20, gt=0)
    mempool_cap: int = Field(default=600, gt=0)
    authorities: List[Authority] = Field(min_length=1)
    batch_size: Optional[int] = Field(default=None, gt=0)
    max_payload: int = Field(default=1024, gt=0)

    @model_validator(mode="after")
    def _check_limits(self) -> "LedgerConfig":
        if self.mempool_cap < self.tps_cap:
            raise ValueError("mempool_cap must be >= tps_cap")
        ids = [a.pdl_id for a in self.authorities]
        if len(ids) != len(set(ids)):
            raise ValueError("authority pdl_ids must be unique")
        return self

    @property
    def effective_batch_size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return max(1, int(self.tps_cap * self.block_interval))


class Admission(BaseModel):
    """Result of submitting a transaction to the mempool"""
    admitted: bool
    reason: Optional[RejectReason] = None

    @classmethod
    def ok(cls) -> "Admission":
        return cls(admitted=True)

    @classmethod
    def rejected(cls, reason: RejectReason) -> "Admission":
        return cls(admitted=False, reason=reason)


class ChainVerdict(BaseModel):
    """Outcome of chain verification; names the lowest offending height"""
    valid: bool
    height: Optional[int] = None
    check: Optional[ChainCheck] = None
    detail: Optional[str] = None


# ---------------------------------------------------------------------------
# Contracts
# ---------------------------------------------------------------------------

class ContractKind(str, Enum):
    SLA = "Sla"
    FLOW_REGISTRY = "FlowRegistry"


class SlaStatus(str, Enum):
    PENDING = "Pending"
    ACTIVE = "Active"
    EXPIRED = "Expired"
    TERMINATED = "Terminated"


class RecordRole(str, Enum):
    SOURCE = "SourceRecord"
    DESTINATION = "DestinationRecord"
    HOP = "HopRecord"


class SlaTerms(BaseModel):
    """Lease terms carried by an SLA contract (latency-target SLAs)"""
    lease_duration: float = Field(gt=0)
    price: float = Field(default=0.0, ge=0)
    latency_target: float = Field(gt=0)
    penalty_rate: float = Field(default=0.0, ge=0)


class SlaContract(BaseModel):
    model_config = ConfigDict(frozen=True)

    address: str
    deployer: str
    usable_at: float
    owner: Optional[str] = None
    tenant: Optional[str] = None
    lease_start: Optional[float] = None
    lease_duration: float
    price: float
    latency_target: float
    penalty_rate: float
    status: SlaStatus = SlaStatus.PENDING

    @property
    def lease_end(self) -> Optional[float]:
        if self.lease_start is None:
            return None
        return self.lease_start + self.lease_duration


class FlowRegistryInfo(BaseModel):
    model_config = ConfigDict(frozen=True)

    address: str
    deployer: str
    usable_at: float


class FlowRecordEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    digest: HexBytes
    submitter: str
    role: RecordRole
    commit_height: Optional[int] = None

    @field_validator("digest")
    @classmethod
    def _digest_size(cls, value: bytes) -> bytes:
        if len(value) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes")
        return value

    @property
    def key(self) -> Tuple[bytes, str, RecordRole]:
        return (self.digest, self.submitter, self.role)


class FlowPreimage(BaseModel):
    """Off-ledger flow data whose digest is recorded on chain"""
    model_config = ConfigDict(frozen=True)

    node_id: str = Field(min_length=1, pattern=r"^[^|\s]+$")
    src_ip: IPv4
    dst_ip: IPv4
    timestamp: int = Field(ge=0)

    def encode(self) -> bytes:
        return f"{self.node_id}|{self.src_ip}|{self.dst_ip}|{self.timestamp}".encode("ascii")

    @classmethod
    def decode(cls, encoded: str) -> "FlowPreimage":
        parts = encoded.split("|")
        if len(parts) != 4 or not parts[3].isdigit():
            raise ValueError(f"not a canonical preimage: {encoded!r}")
        return cls(node_id=parts[0], src_ip=parts[1], dst_ip=parts[2], timestamp=int(parts[3]))


class ExecutionFailure(BaseModel):
    """A committed transaction that executed as a no-op"""
    model_config = ConfigDict(frozen=True)

    submitter: str
    nonce: int
    contract: str
    reason: str
    height: Optional[int] = None


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

class ParticipantKind(str, Enum):
    OWNER = "Owner"
    TENANT = "Tenant"
    OWNER_TENANT = "OwnerTenant"
    VENDOR = "Vendor"
    REGULATOR = "Regulator"


class Participant(BaseModel):
    model_config = ConfigDict(frozen=True)

    pdl_id: str
    label: str
    kind: ParticipantKind
    credential: str

    @property
    def can_lease(self) -> bool:
        return self.kind in (ParticipantKind.TENANT, ParticipantKind.OWNER_TENANT)

    @property
    def can_submit(self) -> bool:
        return self.kind is not ParticipantKind.REGULATOR


class ResourceRequest(BaseModel):
    request_id: str
    tenant: str
    src_device: str
    dst_device: str
    bandwidth: float = Field(gt=0)
    lease_duration: float = Field(gt=0)
    latency_target: float = Field(gt=0)
    submitted_at: float = Field(ge=0)
    price: float = Field(default=0.0, ge=0)
    penalty_rate: float = Field(default=0.0, ge=0)
    # Token the tenant presents to the access check
    credential: Optional[str] = None


class AllocationState(str, Enum):
    RESERVED = "Reserved"
    LIVE = "Live"
    EXPIRED = "Expired"
    TERMINATED = "Terminated"
    CANCELLED = "Cancelled"


class Allocation(BaseModel):
    request_id: str
    tenant: str
    path: List[str]
    links: List[str]
    bandwidth: float
    sla_address: str
    window_start: float
    window_end: float
    state: AllocationState = AllocationState.RESERVED

    @property
    def window(self) -> Tuple[float, float]:
        return (self.window_start, self.window_end)

    def covers(self, t: float) -> bool:
        return self.window_start <= t < self.window_end


class RequestStatus(str, Enum):
    CONFIRMED = "Confirmed"
    WAITLISTED = "Waitlisted"
    DENIED = "Denied"


class DenyReason(str, Enum):
    NO_AGREEMENT = "NoAgreement"
    NO_PATH = "NoPath"
    LEDGER_REJECTED = "LedgerRejected"


class RequestOutcome(BaseModel):
    request_id: str
    status: RequestStatus
    allocation: Optional[Allocation] = None
    reason: Optional[DenyReason] = None


class OrchestrationEvent(BaseModel):
    time: float
    kind: str
    request_id: str
    detail: Dict[str, Any] = Field(default_factory=dict)


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

class BehaviorKind(str, Enum):
    HONEST = "Honest"
    DELAYED_TIMESTAMP = "DelayedTimestamp"
    DROP_RECEIPT = "DropReceipt"
    FRAUD_ROUTER = "FraudRouter"
    SLOW_FORWARD = "SlowForward"


class Behavior(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: BehaviorKind = BehaviorKind.HONEST
    skew_ms: int = Field(default=0, ge=0)
    delay_ms: int = Field(default=0, ge=0)


class Device(BaseModel):
    model_config = ConfigDict(validate_assignment=True)

    name: str
    pdl_id: str
    ip: IPv4
    owner: str
    vendor: str
    behavior: Behavior = Field(default_factory=Behavior)
    tee_enabled: bool = False


class Link(BaseModel):
    model_config = ConfigDict(frozen=True)

    link_id: str
    a: str
    b: str
    capacity: float = Field(gt=0)
    latency: int = Field(ge=0)
    cost: float = Field(default=1.0, ge=0)

    @property
    def endpoints(self) -> Tuple[str, str]:
        return (self.a, self.b)


class Flow(BaseModel):
    flow_id: str
    request_id: str
    src_device: str
    dst_device: str
    src_ip: IPv4
    dst_ip: IPv4
    start_ts: int
    path: List[str]
    agreed_path: List[str]
    segment_latencies: List[int]
    routed_by: Optional[str] = None

    @property
    def end_ts(self) -> int:
        return self.start_ts + sum(self.segment_latencies)


class EventTag(IntEnum):
    """Tie-break order for events sharing a timestamp"""
    REQUEST_ARRIVAL = 0
    FLOW_START = 1
    FLOW_ARRIVAL = 2
    RECORD_SUBMIT = 3
    SEAL_DUE = 4
    TICK = 5
    IP_CHANGE = 6
    BLACKLIST = 7


class ScenarioEvent(BaseModel):
    time: float
    tag: EventTag
    seq: int
    payload: Dict[str, Any] = Field(default_factory=dict)

    @property
    def sort_key(self) -> Tuple[float, int, int]:
        return (self.time, int(self.tag), self.seq)


# ---------------------------------------------------------------------------
# Audit
# ---------------------------------------------------------------------------

class Verdict(str, Enum):
    COMPLIANT = "Compliant"
    VIOLATION = "Violation"
    UNVERIFIABLE = "Unverifiable"


class UnverifiableReason(str, Enum):
    MISSING_SOURCE_RECORD = "MissingSourceRecord"
    MISSING_DESTINATION_RECORD = "MissingDestinationRecord"
    DIGEST_MISMATCH = "DigestMismatch"


class FlowVerification(BaseModel):
    latency: Optional[int] = None
    reason: Optional[UnverifiableReason] = None

    @property
    def verified(self) -> bool:
        return self.reason is None


class AuditFinding(BaseModel):
    flow_id: str
    sla_address: str
    measured_latency: Optional[int] = None
    latency_target: float
    verdict: Verdict
    reason: Optional[UnverifiableReason] = None
    blamed: Optional[str] = None
    penalty: float = 0.0

    @model_validator(mode="after")
    def _check_verdict(self) -> "AuditFinding":
        if self.verdict is Verdict.VIOLATION:
            if self.measured_latency is None or self.measured_latency <= self.latency_target:
                raise ValueError("a violation needs measured_latency > latency_target")
            if self.blamed is None:
                raise ValueError("a violation must name a blamed party")
        if self.verdict is Verdict.UNVERIFIABLE and self.reason is None:
            raise ValueError("an unverifiable finding needs a reason")
        return self


class BlacklistEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    pdl_id: str
    reason: str
    time: float


class FlowManifest(BaseModel):
    """What the auditing parties know about a flow off-ledger"""
    flow_id: str
    sla_address: str
    src_device: str
    dst_device: str
    path: List[str]
    segment_latencies: List[int]
    agreed_path: List[str]
    owners: Dict[str, str]
    # pdl_id of the device that diverted the flow, when it is known
    routed_by: Optional[str] = None


class DisclosedPreimage(BaseModel):
    flow_id: str
    role: RecordRole
    device: str
    digest: HexBytes
    encoding: str


class FlowDisclosure(BaseModel):
    manifest: FlowManifest
    preimages: List[DisclosedPreimage] = Field(default_factory=list)

    def preimage_for(self, role: RecordRole, device: Optional[str] = None) -> Optional[DisclosedPreimage]:
        for item in self.preimages:
            if item.role is role and (device is None or item.device == device):
                return item
        return None


# ---------------------------------------------------------------------------
# Run summary
# ---------------------------------------------------------------------------

class RunSummary(BaseModel):
    seed: int
    blocks_sealed: int = 0
    txs_admitted: int = 0
    txs_committed: int = 0
    txs_pending: int = 0
    txs_rejected: Dict[str, int] = Field(default_factory=dict)
    execution_failures: int = 0
    allocations_confirmed: int = 0
    allocations_waitlisted: int = 0
    allocations_denied: int = 0
    flows_completed: int = 0
    flows_skipped: int = 0
    findings: int = 0
    violations: int = 0
    unverifiable: int = 0
    penalties_total: float = 0.0
    blacklisted: List[str] = Field(default_factory=list)
    commit_latency_mean: Optional[float] = None
    commit_latency_p95: Optional[float] = None
    modeled_record_overhead_ms: float = 0.0
    modeled_contract_overhead_s: float = 0.0
    state_digest: str = ""

    @model_validator(mode="after")
    def _check_counters(self) -> "RunSummary":
        if self.txs_admitted != self.txs_committed + self.txs_pending:
            raise ValueError("admitted must equal committed + pending")
        return self
