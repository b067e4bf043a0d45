from typing import Dict, Optional, Tuple
import logging

from src.database.models import SlaStatus
from src.services.logging.sim_logger import SlaTransition
from .validators import PayloadValidator

logger = logging.getLogger(__name__)

# SLA lifecycle: Pending → Active → {Expired, Terminated}
STATE_FLOW: Dict[SlaStatus, Dict] = {
    SlaStatus.PENDING: {
        'next': [SlaStatus.ACTIVE],
        'required': ['owner', 'tenant', 'lease_start', 'terms'],
        'description': 'Deployed, waiting for initialization'
    },
    SlaStatus.ACTIVE: {
        'next': [SlaStatus.EXPIRED, SlaStatus.TERMINATED],
        'required': [],
        'description': 'Lease running, latency target enforced'
    },
    SlaStatus.EXPIRED: {
        'next': [],
        'required': [],
        'description': 'Lease window ended'
    },
    SlaStatus.TERMINATED: {
        'next': [],
        'required': [],
        'description': 'Ended early by the orchestrator'
    }
}

_TRANSITIONS = {
    (SlaStatus.PENDING, SlaStatus.ACTIVE): SlaTransition.PENDING_TO_ACTIVE,
    (SlaStatus.ACTIVE, SlaStatus.EXPIRED): SlaTransition.ACTIVE_TO_EXPIRED,
    (SlaStatus.ACTIVE, SlaStatus.TERMINATED): SlaTransition.ACTIVE_TO_TERMINATED,
}

_validator = PayloadValidator()


def validate_state_transition(current: SlaStatus, target: SlaStatus) -> Tuple[bool, Optional[str]]:
    """Validate if a transition follows the SLA lifecycle"""
    if current not in STATE_FLOW:
        return False, f"Invalid current state: {current}"
    allowed = [s.value for s in STATE_FLOW[current]['next']]
    return _validator.validate_state_transition(current.value, target.value, allowed)


def transition_for(current: SlaStatus, target: SlaStatus) -> Optional[SlaTransition]:
    return _TRANSITIONS.get((current, target))


def required_fields(target: SlaStatus) -> list:
    """Fields an init call must carry to leave the given state"""
    return STATE_FLOW[target]['required']
