from .audit_service import AuditService
from .blacklist import Blacklist
from .blame import assign_blame
from .disclosure import dump_disclosures, load_disclosures
from .regulator import RegulatorView

__all__ = [
    "AuditService",
    "Blacklist",
    "RegulatorView",
    "assign_blame",
    "dump_disclosures",
    "load_disclosures",
]
