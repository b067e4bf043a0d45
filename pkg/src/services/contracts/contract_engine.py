import logging
from collections import deque
from typing import Any, Deque, Dict, Optional, Union

from pydantic import ValidationError

from src.database.models import (
    Block,
    ContractKind,
    FlowPreimage,
    FlowRecordEntry,
    RecordRole,
    SlaContract,
    SlaStatus,
    SlaTerms,
    Transaction,
)
from src.services.crypto.hashing import record_digest
from src.services.errors import (
    AlreadyActive,
    DuplicateRecord,
    InvalidParams,
    InvalidSlaState,
    LedgerRejected,
    NotYetUsable,
    Unauthorized,
    UnknownContract,
)
from src.services.ledger.ledger_service import Ledger
from src.services.logging.sim_logger import SimLogger
from src.services.state.sla_state_machine import transition_for
from .contract_state import (
    ContractRules,
    ContractState,
    contract_address,
    encode_call,
    execute,
    replay_chain,
)

logger = logging.getLogger(__name__)


class ContractEngine:
    """Hosts SLA and flow-registry contracts on top of the ledger.

    Two states are kept: `committed` (executed block by block, what a replay
    of the chain yields) and `view` (committed plus every admitted-but-pending
    transaction, in admission order). Because the ledger commits FIFO without
    loss, `view` equals `committed` once the mempool drains.
    """

    def __init__(self, ledger: Ledger, rules: Optional[ContractRules] = None):
        self.ledger = ledger
        self.rules = rules or ContractRules()
        self.events = SimLogger()
        self.committed = ContractState()
        self._view = ContractState()
        self._pending: Deque[Transaction] = deque()
        ledger.add_admission_listener(self._on_admitted)
        ledger.add_commit_listener(self._on_committed)

    # -- ledger hooks -----------------------------------------------------

    def _on_admitted(self, tx: Transaction, now: float):
        self._pending.append(tx)
        self._view = execute(tx, self._view, self.rules)

    def _on_committed(self, block: Block):
        for tx in block.transactions:
            self.committed = execute(tx, self.committed, self.rules, block.height)
            self._pending.popleft()
        failures = len(self.committed.failures)
        state = self.committed
        for tx in self._pending:
            state = execute(tx, state, self.rules)
        self._view = state
        self.events.contract_event("block executed", {
            "height": block.height,
            "transactions": len(block.transactions),
            "failures_total": failures
        })

    # -- submission -------------------------------------------------------

    def _submit(self, submitter: str, contract: str, payload: bytes, now: float) -> Transaction:
        tx = Transaction(
            submitter=submitter,
            contract=contract,
            payload=payload,
            nonce=self.ledger.next_nonce(submitter),
            submit_ts=now,
        )
        admission = self.ledger.submit_transaction(tx, now)
        if not admission.admitted:
            raise LedgerRejected(admission.reason)
        return tx

    def deploy_contract(self, kind: ContractKind, params: Optional[Dict[str, Any]], deployer: str, now: float) -> str:
        """Deploy a contract; it becomes usable after the configured deploy delay"""
        if not self.ledger.is_permitted(deployer):
            raise Unauthorized(f"{deployer} may not deploy contracts")

        fields: Dict[str, Any] = {"kind": kind.value}
        if kind is ContractKind.SLA:
            try:
                terms = SlaTerms(**(params or {}))
            except (TypeError, ValidationError) as e:
                raise InvalidParams(str(e)) from e
            fields["terms"] = terms.model_dump()
        elif params:
            raise InvalidParams("a flow registry takes no parameters")

        address = contract_address(deployer, self.ledger.next_nonce(deployer), kind)
        self._submit(deployer, address, encode_call("deploy", **fields), now)
        self.events.contract_event("deployed", {
            "kind": kind.value,
            "address": address,
            "deployer": deployer,
            "usable_at": now + self.rules.deploy_delay
        })
        return address

    def init_sla(
        self,
        address: str,
        owner: str,
        tenant: str,
        terms: Union[SlaTerms, Dict[str, Any]],
        now: float,
        caller: Optional[str] = None,
        lease_start: Optional[float] = None,
    ) -> SlaContract:
        """Move a deployed SLA from Pending to Active with a fixed lease window"""
        caller = caller or self.rules.manager_id
        sla = self.sla(address)
        if caller != self.rules.manager_id:
            raise Unauthorized("only the orchestration manager initializes SLAs")
        if sla.status is not SlaStatus.PENDING:
            self.events.sla_transition(transition_for(SlaStatus.PENDING, SlaStatus.ACTIVE), address, success=False)
            raise AlreadyActive(f"SLA {address} is {sla.status.value}")
        if now < sla.usable_at:
            raise NotYetUsable(f"SLA {address} usable from {sla.usable_at}, now {now}")
        try:
            terms = terms if isinstance(terms, SlaTerms) else SlaTerms(**terms)
        except (TypeError, ValidationError) as e:
            raise InvalidParams(str(e)) from e

        start = now if lease_start is None else lease_start
        payload = encode_call("init", owner=owner, tenant=tenant, lease_start=start, terms=terms.model_dump())
        self._submit(caller, address, payload, now)
        self.events.sla_transition(
            transition_for(SlaStatus.PENDING, SlaStatus.ACTIVE), address,
            details={"tenant": tenant, "lease_start": start, "lease_end": start + terms.lease_duration}
        )
        return self.sla(address)

    def _close_sla(self, address: str, target: SlaStatus, now: float, payload: bytes) -> SlaContract:
        sla = self.sla(address)
        transition = transition_for(sla.status, target)
        if transition is None:
            raise InvalidSlaState(f"SLA {address} cannot move from {sla.status.value} to {target.value}")
        if target is SlaStatus.EXPIRED and now < sla.lease_end:
            raise InvalidSlaState(f"SLA {address} lease runs until {sla.lease_end}")
        self._submit(self.rules.manager_id, address, payload, now)
        self.events.sla_transition(transition, address, details={"at": now})
        return self.sla(address)

    def expire_sla(self, address: str, now: float) -> SlaContract:
        return self._close_sla(address, SlaStatus.EXPIRED, now, encode_call("expire"))

    def terminate_sla(self, address: str, reason: str, now: float) -> SlaContract:
        return self._close_sla(address, SlaStatus.TERMINATED, now, encode_call("terminate", reason=reason))

    def record_flow(
        self,
        registry: str,
        preimage: FlowPreimage,
        role: RecordRole,
        submitter: str,
        now: float,
    ) -> Transaction:
        """Record the digest of a flow preimage; the preimage stays off-ledger"""
        info = self._view.registries.get(registry)
        if info is None:
            raise UnknownContract(f"no flow registry at {registry}")
        if now < info.usable_at:
            raise NotYetUsable(f"registry {registry} usable from {info.usable_at}")

        digest = record_digest(preimage.encode(), self.rules.digest_algorithm)
        if self._view.has_record(registry, digest, submitter, role):
            raise DuplicateRecord(f"{role.value} from {submitter} already recorded")

        tx = self._submit(submitter, registry, encode_call("record", digest=digest.hex(), role=role.value), now)
        self.events.contract_event("flow recorded", {
            "registry": registry,
            "submitter": submitter,
            "role": role.value,
            "digest": digest.hex()[:16]
        })
        return tx

    # -- queries ----------------------------------------------------------

    @property
    def view(self) -> ContractState:
        return self._view

    def sla(self, address: str) -> SlaContract:
        sla = self._view.slas.get(address)
        if sla is None:
            raise UnknownContract(f"no SLA contract at {address}")
        return sla

    def committed_entries(self, registry: str):
        return self.committed.entries(registry)

    def find_committed(self, registry: str, digest: bytes, role: RecordRole) -> Optional[FlowRecordEntry]:
        for entry in self.committed.entries(registry):
            if entry.digest == digest and entry.role is role:
                return entry
        return None

    def active_sla_count(self) -> int:
        return sum(1 for sla in self._view.slas.values() if sla.status is SlaStatus.ACTIVE)

    def replay(self) -> ContractState:
        """Re-execute the committed chain from genesis"""
        return replay_chain(self.ledger.chain, self.rules)

    def state_digest(self) -> bytes:
        return self.committed.digest()


def compute_penalty(sla: SlaContract, violations: int) -> float:
    """Penalty owed for a number of violations under an SLA"""
    if sla.status not in (SlaStatus.ACTIVE, SlaStatus.EXPIRED):
        raise InvalidSlaState(f"penalties apply to Active or Expired SLAs, not {sla.status.value}")
    if violations < 0:
        raise ValueError("violations must be non-negative")
    return violations * sla.penalty_rate
