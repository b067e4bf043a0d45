import logging
from typing import Dict, List, Optional

from src.database.models import Participant, ParticipantKind
from src.services.crypto.hashing import canonical_json, sha3_256
from src.services.errors import DuplicateLabel

logger = logging.getLogger(__name__)

MANAGER_ID = "pdl-0000"


class AccessControlDB:
    """In-memory credential database kept by the Orchestration Manager.

    Participants and devices draw PDL-IDs from one counter, so ids are unique
    across both and stable for the lifetime of the record.
    """

    def __init__(self):
        self._participants: Dict[str, Participant] = {}
        self._labels: Dict[str, str] = {}
        self._device_ids: Dict[str, str] = {}
        self._counter = 0

    def _next_pdl_id(self) -> str:
        self._counter += 1
        return f"pdl-{self._counter:04d}"

    @staticmethod
    def _issue_credential(pdl_id: str, label: str, kind: ParticipantKind) -> str:
        # Opaque token; deterministic so runs stay reproducible
        return sha3_256(canonical_json(["credential", pdl_id, label, kind.value]))[:16].hex()

    def create_participant(self, kind: ParticipantKind, label: str) -> Participant:
        """Create a participant record with a fresh PDL-ID and credential"""
        if label in self._labels:
            raise DuplicateLabel(f"participant label already registered: {label}")
        pdl_id = self._next_pdl_id()
        participant = Participant(
            pdl_id=pdl_id,
            label=label,
            kind=kind,
            credential=self._issue_credential(pdl_id, label, kind),
        )
        self._participants[pdl_id] = participant
        self._labels[label] = pdl_id
        logger.info(f"[AccessControl] Registered participant {label}", extra={
            "pdl_id": pdl_id,
            "kind": kind.value
        })
        return participant

    def get(self, pdl_id: str) -> Optional[Participant]:
        return self._participants.get(pdl_id)

    def get_by_label(self, label: str) -> Optional[Participant]:
        pdl_id = self._labels.get(label)
        return self._participants.get(pdl_id) if pdl_id else None

    def pdl_id_for_label(self, label: str) -> str:
        participant = self.get_by_label(label)
        if participant is None:
            raise KeyError(f"unknown participant label: {label}")
        return participant.pdl_id

    def verify(self, pdl_id: str, credential: Optional[str]) -> bool:
        """Answer an access-control confirmation query"""
        participant = self._participants.get(pdl_id)
        return participant is not None and participant.credential == credential

    def has_agreement(self, pdl_id: str) -> bool:
        """A tenant has an agreement once registered with leasing rights"""
        participant = self._participants.get(pdl_id)
        return participant is not None and participant.can_lease

    def assign_device_id(self, device_name: str) -> str:
        """Idempotent: a device keeps its PDL-ID whatever its IP address"""
        if device_name not in self._device_ids:
            self._device_ids[device_name] = self._next_pdl_id()
        return self._device_ids[device_name]

    def device_ids(self) -> Dict[str, str]:
        return dict(self._device_ids)

    def participants(self) -> List[Participant]:
        return list(self._participants.values())
