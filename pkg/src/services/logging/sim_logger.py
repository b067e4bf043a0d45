from enum import Enum
import logging
import json

class SlaTransition(Enum):
    PENDING_TO_ACTIVE = "PENDING → ACTIVE"
    ACTIVE_TO_EXPIRED = "ACTIVE → EXPIRED"
    ACTIVE_TO_TERMINATED = "ACTIVE → TERMINATED"

class SimLogger:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized: return

        # Single logger for all simulation events
        self.logger = logging.getLogger('beat.events')
        self._initialized = True

    def _format_details(self, details: dict) -> str:
        if not details:
            return ""
        return "\n    " + "\n    ".join(f"{k}: {v}" for k, v in details.items())

    def log_event(self, category: str, action: str, details: dict = None, level: int = logging.DEBUG):
        """Unified logging method for all events"""
        if details is None:
            details = {}

        if not self.logger.isEnabledFor(level):
            return
        msg = f"{category}: {action}{self._format_details(details)}"
        self.logger.log(level, msg)

    def sla_transition(self, transition: SlaTransition, address: str, success: bool = True, details: dict = None):
        status = "ok" if success else "refused"
        self.log_event(
            category="SLA",
            action=f"{status} {transition.value}",
            details={"address": address, **(details or {})},
            level=logging.INFO
        )

    def ledger_event(self, action: str, details: dict):
        self.log_event(category="⛓ Ledger", action=action, details=details)

    def contract_event(self, action: str, details: dict):
        self.log_event(category="📜 Contract", action=action, details=details)

    def orchestration_event(self, action: str, details: dict):
        self.log_event(category="🎛 Orchestration", action=action, details=details, level=logging.INFO)

    def network_event(self, action: str, details: dict):
        self.log_event(category="🌐 Network", action=action, details=details)

    def audit_event(self, action: str, details: dict):
        self.log_event(category="🔎 Audit", action=action, details=details, level=logging.INFO)

    def error(self, category: str, error_msg: str, details: dict = None):
        self.log_event(
            category=f"❌ {category}",
            action=error_msg,
            details=details,
            level=logging.WARNING
        )

    def finding(self, finding: dict):
        # Compact single-line form for findings; the full record goes to the audit report
        self.logger.debug("finding: %s", json.dumps(finding, sort_keys=True))
