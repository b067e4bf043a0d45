"""Deterministic contract state and the pure transaction executor.

`execute(tx, state, rules, height)` never raises and never mutates its input:
invalid calls become recorded failures and return a state that differs from
the input only by that failure record.
"""

import json
from dataclasses import dataclass, field, replace
from typing import FrozenSet, Iterable, Mapping, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator

from src.database.models import (
    ContractKind,
    ExecutionFailure,
    FlowRecordEntry,
    FlowRegistryInfo,
    RecordRole,
    SlaContract,
    SlaStatus,
    SlaTerms,
    Transaction,
)
from src.services.crypto.hashing import DIGEST_SIZE, RECORD_DIGEST_ALGORITHMS, canonical_json, sha3_256
from src.services.state.sla_state_machine import required_fields, validate_state_transition
from src.services.state.validators import PayloadValidator

RecordKey = Tuple[str, bytes, str, str]

_validator = PayloadValidator()

# Per-op payload schemas: (required fields, field types)
CALL_SCHEMAS = {
    "deploy": (["kind"], {"kind": "string", "terms": "dict"}),
    "init": (required_fields(SlaStatus.PENDING), {
        "owner": "string", "tenant": "string", "lease_start": "number", "terms": "dict"
    }),
    "expire": ([], {}),
    "terminate": (["reason"], {"reason": "string"}),
    "record": (["digest", "role"], {"digest": "string", "role": "string"}),
}


class ContractRules(BaseModel):
    """Execution parameters every replica must share"""
    deploy_delay: float = Field(default=14.0, ge=0)
    manager_id: str = "pdl-0000"
    digest_algorithm: str = "sha3_256"

    @field_validator("digest_algorithm")
    @classmethod
    def _known_algorithm(cls, value: str) -> str:
        if value not in RECORD_DIGEST_ALGORITHMS:
            raise ValueError(f"digest_algorithm must be one of {RECORD_DIGEST_ALGORITHMS}")
        return value


def contract_address(deployer: str, nonce: int, kind: ContractKind) -> str:
    """Deterministic address derived from deployer, nonce and kind"""
    return "0x" + sha3_256(canonical_json([deployer, nonce, kind.value]))[:20].hex()


def encode_call(op: str, **fields) -> bytes:
    return canonical_json({"op": op, **fields})


@dataclass(frozen=True)
class ContractState:
    slas: Mapping[str, SlaContract] = field(default_factory=dict)
    registries: Mapping[str, FlowRegistryInfo] = field(default_factory=dict)
    records: Mapping[str, Tuple[FlowRecordEntry, ...]] = field(default_factory=dict)
    record_keys: FrozenSet[RecordKey] = frozenset()
    failures: Tuple[ExecutionFailure, ...] = ()

    def has_record(self, registry: str, digest: bytes, submitter: str, role: RecordRole) -> bool:
        return (registry, digest, submitter, role.value) in self.record_keys

    def entries(self, registry: str) -> Tuple[FlowRecordEntry, ...]:
        return self.records.get(registry, ())

    def to_record(self) -> dict:
        return {
            "slas": {a: s.model_dump(mode="json") for a, s in sorted(self.slas.items())},
            "registries": {a: r.model_dump(mode="json") for a, r in sorted(self.registries.items())},
            "records": {
                a: [e.model_dump(mode="json") for e in entries]
                for a, entries in sorted(self.records.items())
            },
            "failures": [f.model_dump(mode="json") for f in self.failures],
        }

    def digest(self) -> bytes:
        return sha3_256(canonical_json(self.to_record()))


def _fail(tx: Transaction, state: ContractState, reason: str, height: Optional[int]) -> ContractState:
    failure = ExecutionFailure(
        submitter=tx.submitter, nonce=tx.nonce, contract=tx.contract, reason=reason, height=height
    )
    return replace(state, failures=state.failures + (failure,))


def _with_sla(state: ContractState, sla: SlaContract) -> ContractState:
    slas = dict(state.slas)
    slas[sla.address] = sla
    return replace(state, slas=slas)


def _deploy(tx, call, state, rules, height):
    try:
        kind = ContractKind(call["kind"])
    except ValueError:
        return _fail(tx, state, "InvalidParams", height)
    address = contract_address(tx.submitter, tx.nonce, kind)
    if tx.contract != address:
        return _fail(tx, state, "AddressMismatch", height)
    if address in state.slas or address in state.registries:
        return _fail(tx, state, "AddressInUse", height)

    usable_at = tx.submit_ts + rules.deploy_delay
    if kind is ContractKind.FLOW_REGISTRY:
        registries = dict(state.registries)
        registries[address] = FlowRegistryInfo(address=address, deployer=tx.submitter, usable_at=usable_at)
        return replace(state, registries=registries)

    try:
        terms = SlaTerms(**call.get("terms", {}))
    except (TypeError, ValidationError):
        return _fail(tx, state, "InvalidParams", height)
    sla = SlaContract(
        address=address,
        deployer=tx.submitter,
        usable_at=usable_at,
        **terms.model_dump(),
    )
    return _with_sla(state, sla)


def _init(tx, call, state, rules, height):
    sla = state.slas.get(tx.contract)
    if sla is None:
        return _fail(tx, state, "UnknownContract", height)
    if tx.submitter != rules.manager_id:
        return _fail(tx, state, "Unauthorized", height)
    valid, _ = validate_state_transition(sla.status, SlaStatus.ACTIVE)
    if not valid:
        return _fail(tx, state, "AlreadyActive", height)
    if tx.submit_ts < sla.usable_at:
        return _fail(tx, state, "NotYetUsable", height)
    try:
        terms = SlaTerms(**call["terms"])
    except (TypeError, ValidationError):
        return _fail(tx, state, "InvalidParams", height)
    active = sla.model_copy(update={
        "owner": call["owner"],
        "tenant": call["tenant"],
        "lease_start": float(call["lease_start"]),
        "status": SlaStatus.ACTIVE,
        **terms.model_dump(),
    })
    return _with_sla(state, active)


def _close(tx, call, state, rules, height, target: SlaStatus):
    sla = state.slas.get(tx.contract)
    if sla is None:
        return _fail(tx, state, "UnknownContract", height)
    if tx.submitter != rules.manager_id:
        return _fail(tx, state, "Unauthorized", height)
    valid, _ = validate_state_transition(sla.status, target)
    if not valid:
        return _fail(tx, state, "InvalidTransition", height)
    if target is SlaStatus.EXPIRED and tx.submit_ts < sla.lease_end:
        return _fail(tx, state, "LeaseNotEnded", height)
    return _with_sla(state, sla.model_copy(update={"status": target}))


def _record(tx, call, state, rules, height):
    registry = state.registries.get(tx.contract)
    if registry is None:
        return _fail(tx, state, "UnknownContract", height)
    if tx.submit_ts < registry.usable_at:
        return _fail(tx, state, "NotYetUsable", height)
    try:
        digest = bytes.fromhex(call["digest"])
        role = RecordRole(call["role"])
    except ValueError:
        return _fail(tx, state, "MalformedPayload", height)
    if len(digest) != DIGEST_SIZE:
        return _fail(tx, state, "MalformedPayload", height)
    key = (tx.contract, digest, tx.submitter, role.value)
    if key in state.record_keys:
        return _fail(tx, state, "DuplicateRecord", height)

    entry = FlowRecordEntry(digest=digest, submitter=tx.submitter, role=role, commit_height=height)
    records = dict(state.records)
    records[tx.contract] = state.entries(tx.contract) + (entry,)
    return replace(state, records=records, record_keys=state.record_keys | {key})


def execute(tx: Transaction, state: ContractState, rules: ContractRules, height: Optional[int] = None) -> ContractState:
    """Apply one transaction; a pure function of (state, tx, rules, height)"""
    try:
        call = json.loads(tx.payload.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        return _fail(tx, state, "MalformedPayload", height)
    op = call.get("op") if isinstance(call, dict) else None
    if op not in CALL_SCHEMAS:
        return _fail(tx, state, "UnknownOperation", height)
    required, types = CALL_SCHEMAS[op]
    valid, _ = _validator.validate_call(call, required, types)
    if not valid:
        return _fail(tx, state, "MalformedPayload", height)

    if op == "deploy":
        return _deploy(tx, call, state, rules, height)
    if op == "init":
        return _init(tx, call, state, rules, height)
    if op == "expire":
        return _close(tx, call, state, rules, height, SlaStatus.EXPIRED)
    if op == "terminate":
        return _close(tx, call, state, rules, height, SlaStatus.TERMINATED)
    return _record(tx, call, state, rules, height)


def replay(committed: Iterable[Tuple[Transaction, int]], rules: ContractRules) -> ContractState:
    """Rebuild contract state from committed (transaction, height) pairs"""
    state = ContractState()
    for tx, height in committed:
        state = execute(tx, state, rules, height)
    return state


def replay_chain(chain, rules: ContractRules) -> ContractState:
    return replay(((tx, block.height) for block in chain for tx in block.transactions), rules)
