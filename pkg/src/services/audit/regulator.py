from typing import List, Optional, Sequence, Tuple

from src.database.models import AuditFinding, Block, ChainVerdict, SlaContract
from src.services.contracts import ContractEngine, ContractState
from src.services.errors import UnknownContract
from src.services.ledger import Ledger, verify_chain
from .blacklist import Blacklist


class RegulatorView:
    """Read-only access for regulators: chain, contract state, findings.

    Regulators hold no ledger credentials; nothing here submits or mutates.
    """

    def __init__(
        self,
        ledger: Ledger,
        engine: ContractEngine,
        findings: Sequence[AuditFinding] = (),
        blacklist: Optional[Blacklist] = None,
    ):
        self._ledger = ledger
        self._engine = engine
        self._findings = tuple(f.model_copy() for f in findings)
        self._blacklist = blacklist

    def chain(self) -> Tuple[Block, ...]:
        return tuple(self._ledger.chain)

    def verify(self) -> ChainVerdict:
        return verify_chain(self._ledger.chain, self._ledger.authority_ids)

    def contract_state(self) -> ContractState:
        return self._engine.committed

    def sla(self, address: str) -> SlaContract:
        sla = self._engine.committed.slas.get(address)
        if sla is None:
            raise UnknownContract(f"no committed SLA at {address}")
        return sla

    def findings(self) -> List[AuditFinding]:
        return [f.model_copy() for f in self._findings]

    def blacklisted(self) -> List[str]:
        return self._blacklist.ids() if self._blacklist else []
