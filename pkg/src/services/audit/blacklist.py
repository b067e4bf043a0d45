import logging
from typing import Dict, List, Optional

from src.database.models import BlacklistEntry
from src.services.errors import AlreadyBlacklisted, GovernanceNotConvened
from src.services.ledger import Ledger
from src.services.logging.sim_logger import SimLogger

logger = logging.getLogger(__name__)


class Blacklist:
    """Governance blacklist; entries revoke ledger admission from then on"""

    def __init__(self, ledger: Optional[Ledger] = None, enabled: bool = False):
        self.ledger = ledger
        self.enabled = enabled
        self.entries: Dict[str, BlacklistEntry] = {}
        self.events = SimLogger()

    def blacklist_node(self, pdl_id: str, reason: str, now: float) -> BlacklistEntry:
        if not self.enabled:
            raise GovernanceNotConvened("blacklisting needs the governance quorum flag")
        if pdl_id in self.entries:
            raise AlreadyBlacklisted(f"{pdl_id} blacklisted at {self.entries[pdl_id].time}")
        entry = BlacklistEntry(pdl_id=pdl_id, reason=reason, time=now)
        self.entries[pdl_id] = entry
        if self.ledger is not None:
            self.ledger.revoke(pdl_id)
        self.events.audit_event("blacklisted", {"pdl_id": pdl_id, "reason": reason, "time": now})
        return entry

    def __contains__(self, pdl_id: str) -> bool:
        return pdl_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> List[str]:
        return sorted(self.entries)
