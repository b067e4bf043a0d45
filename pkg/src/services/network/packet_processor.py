import logging
from dataclasses import dataclass
from typing import Optional

from pydantic import BaseModel, Field

from src.database.models import BehaviorKind, Device, Flow, FlowPreimage, RecordRole, Transaction
from src.services.contracts import ContractEngine
from src.services.crypto.hashing import record_digest
from src.services.logging.sim_logger import SimLogger

logger = logging.getLogger(__name__)


class ProcessingDelays(BaseModel):
    """Modeled per-record overhead between observing a flow and submitting it"""
    capture_ms: float = Field(default=0.65, ge=0)
    hash_ms: float = Field(default=0.31, ge=0)

    @property
    def total_ms(self) -> float:
        return self.capture_ms + self.hash_ms


@dataclass(frozen=True)
class PendingRecord:
    flow_id: str
    role: RecordRole
    device: str
    preimage: FlowPreimage
    digest: bytes
    observed_ms: int
    submit_at: float
    dropped: bool = False

    @property
    def encoding(self) -> str:
        return self.preimage.encode().decode("ascii")


class PacketProcessor:
    """Recording path of one device: builds, hashes and submits flow records.

    Behaviors that tamper with recording (DelayedTimestamp, DropReceipt) act
    here and are suppressed when the device runs inside a TEE.
    """

    def __init__(
        self,
        device: Device,
        engine: ContractEngine,
        registry: str,
        delays: Optional[ProcessingDelays] = None,
        epoch_ms: int = 0,
    ):
        self.device = device
        self.engine = engine
        self.registry = registry
        self.delays = delays or ProcessingDelays()
        self.epoch_ms = epoch_ms
        self.events = SimLogger()

    def _tampers(self, kind: BehaviorKind) -> bool:
        return self.device.behavior.kind is kind and not self.device.tee_enabled

    def process_flow_endpoint(self, flow: Flow, role: RecordRole, now_ms: int) -> PendingRecord:
        """Observe a flow at this device; the record is due after the processing delay"""
        timestamp = now_ms
        if self._tampers(BehaviorKind.DELAYED_TIMESTAMP):
            timestamp += self.device.behavior.skew_ms

        preimage = FlowPreimage(
            node_id=self.device.pdl_id,
            src_ip=flow.src_ip,
            dst_ip=flow.dst_ip,
            timestamp=self.epoch_ms + timestamp,
        )
        pending = PendingRecord(
            flow_id=flow.flow_id,
            role=role,
            device=self.device.pdl_id,
            preimage=preimage,
            digest=record_digest(preimage.encode(), self.engine.rules.digest_algorithm),
            observed_ms=now_ms,
            submit_at=(now_ms + self.delays.total_ms) / 1000.0,
            dropped=self._tampers(BehaviorKind.DROP_RECEIPT),
        )
        if pending.dropped:
            self.events.network_event("record dropped", {
                "device": self.device.name,
                "flow": flow.flow_id,
                "role": role.value
            })
        return pending

    def submit(self, pending: PendingRecord, now: float) -> Transaction:
        """Submit a processed record; LedgerRejected propagates to the caller"""
        if pending.dropped:
            raise ValueError(f"record for {pending.flow_id} was dropped and cannot be submitted")
        return self.engine.record_flow(self.registry, pending.preimage, pending.role, self.device.pdl_id, now)
