"""Scenario files: TOML validated into a ScenarioSpec."""

import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport with the same API
    import tomli as tomllib
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.database.models import IPv4, ParticipantKind
from src.services.crypto.hashing import RECORD_DIGEST_ALGORITHMS
from src.services.errors import SpecParseError, SpecValidationError
from src.services.network.topology import DeviceSpec, LinkSpec, TopologySpec

_TOML_POSITION = re.compile(r"line (\d+), column (\d+)")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LedgerSection(_Section):
    block_interval: float = Field(default=15.0, gt=0)
    tps_cap: int = Field(default=20, gt=0)
    mempool_cap: int = Field(default=600, gt=0)
    batch_size: Optional[int] = Field(default=None, gt=0)
    max_payload: int = Field(default=1024, gt=0)
    # Device names acting as sealing authorities; all devices when unset
    authorities: Optional[List[str]] = None


class ContractsSection(_Section):
    deploy_delay: float = Field(default=14.0, ge=0)
    digest_algorithm: str = "sha3_256"
    execution_overhead_s: float = Field(default=4.0, ge=0)

    @model_validator(mode="after")
    def _known_algorithm(self) -> "ContractsSection":
        if self.digest_algorithm not in RECORD_DIGEST_ALGORITHMS:
            raise ValueError(f"digest_algorithm must be one of {RECORD_DIGEST_ALGORITHMS}")
        return self


class NetworkSection(_Section):
    capture_delay_ms: float = Field(default=0.65, ge=0)
    hash_delay_ms: float = Field(default=0.31, ge=0)
    full_path_recording: bool = False
    epoch_ms: int = Field(default=0, ge=0)
    tick_interval: float = Field(default=5.0, gt=0)


class GovernanceSection(_Section):
    blacklist_enabled: bool = False
    auto_blacklist_unverifiable: bool = False


class RunSection(_Section):
    until: float = Field(default=600.0, gt=0)


class TrafficSection(_Section):
    flows_per_request: int = Field(default=0, ge=0)
    margin_s: float = Field(default=1.0, ge=0)


class ParticipantEntry(_Section):
    label: str = Field(min_length=1)
    kind: ParticipantKind


class RequestEntry(_Section):
    id: str = Field(min_length=1)
    tenant: str
    src: str
    dst: str
    bandwidth: float = Field(gt=0)
    lease_duration: float = Field(gt=0)
    latency_target_ms: float = Field(gt=0)
    at: float = Field(ge=0)
    price: float = Field(default=0.0, ge=0)
    penalty_rate: float = Field(default=0.0, ge=0)


class FlowEntry(_Section):
    request: str
    at_ms: int = Field(ge=0)
    id: Optional[str] = None


class IpChangeEntry(_Section):
    device: str
    ip: IPv4
    at: float = Field(ge=0)


class BlacklistEntrySpec(_Section):
    node: str
    at: float = Field(ge=0)
    reason: str = "governance decision"


class ScenarioSpec(_Section):
    name: str = "scenario"
    # Used when the command line gives no seed
    seed: Optional[int] = Field(default=None, ge=0, lt=2 ** 64)
    ledger: LedgerSection = Field(default_factory=LedgerSection)
    contracts: ContractsSection = Field(default_factory=ContractsSection)
    network: NetworkSection = Field(default_factory=NetworkSection)
    governance: GovernanceSection = Field(default_factory=GovernanceSection)
    run: RunSection = Field(default_factory=RunSection)
    traffic: TrafficSection = Field(default_factory=TrafficSection)
    participants: List[ParticipantEntry] = Field(default_factory=list)
    devices: List[DeviceSpec] = Field(min_length=1)
    links: List[LinkSpec] = Field(default_factory=list)
    requests: List[RequestEntry] = Field(default_factory=list)
    flows: List[FlowEntry] = Field(default_factory=list)
    ip_changes: List[IpChangeEntry] = Field(default_factory=list)
    blacklist: List[BlacklistEntrySpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_references(self) -> "ScenarioSpec":
        labels = [p.label for p in self.participants]
        if len(set(labels)) != len(labels):
            raise ValueError("participant labels must be unique")
        devices = {d.name for d in self.devices}
        for d in self.devices:
            for party in (d.owner, d.vendor):
                if party not in labels:
                    raise ValueError(f"device {d.name} references unknown participant {party}")
        for link in self.links:
            for end in (link.a, link.b):
                if end not in devices:
                    raise ValueError(f"link {link.link_id} references unknown device {end}")
        for name in self.ledger.authorities or []:
            if name not in devices:
                raise ValueError(f"authority {name} is not a device")
        request_ids = [r.id for r in self.requests]
        if len(set(request_ids)) != len(request_ids):
            raise ValueError("request ids must be unique")
        for r in self.requests:
            if r.tenant not in labels:
                raise ValueError(f"request {r.id} references unknown tenant {r.tenant}")
            for end in (r.src, r.dst):
                if end not in devices:
                    raise ValueError(f"request {r.id} references unknown device {end}")
        for f in self.flows:
            if f.request not in request_ids:
                raise ValueError(f"flow references unknown request {f.request}")
        for change in self.ip_changes:
            if change.device not in devices:
                raise ValueError(f"ip change references unknown device {change.device}")
        for entry in self.blacklist:
            if entry.node not in devices and entry.node not in labels:
                raise ValueError(f"blacklist entry references unknown node {entry.node}")
        return self

    def topology_spec(self) -> TopologySpec:
        return TopologySpec(devices=self.devices, links=self.links)


def parse_scenario(text: str) -> ScenarioSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        position = _TOML_POSITION.search(str(e))
        line = int(position.group(1)) if position else None
        raise SpecParseError(str(e), line=line) from e
    try:
        return ScenarioSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise SpecValidationError(first["msg"], field=field) from e


def load_scenario(path: Union[str, Path]) -> ScenarioSpec:
    """Read and validate a scenario file"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SpecParseError(f"cannot read scenario {path}: {e}") from e
    return parse_scenario(text)
