import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, Iterable, List, Optional, Sequence

from src.database.models import Link, ResourceRequest
from src.services.errors import UnknownLink

logger = logging.getLogger(__name__)


@dataclass
class Reservation:
    request_id: str
    bandwidth: float
    start: float
    end: float

    def overlaps(self, start: float, end: float) -> bool:
        return self.start < end and start < self.end

    def active_at(self, t: float) -> bool:
        return self.start <= t < self.end


class NetworkLog:
    """Committed per-link and per-device load over time, plus the waitlist.

    Reservations use half-open windows [start, end). Releasing a reservation
    truncates it at the release instant, so the log keeps the full load
    history for post-hoc sweeps.
    """

    def __init__(self, links: Iterable[Link]):
        self.capacity: Dict[str, float] = {link.link_id: link.capacity for link in links}
        self._links: Dict[str, List[Reservation]] = {link_id: [] for link_id in self.capacity}
        self._devices: Dict[str, List[Reservation]] = {}
        self._by_request: Dict[str, List[Reservation]] = {}
        self.waitlist: Deque[ResourceRequest] = deque()

    def _reservations(self, link_id: str) -> List[Reservation]:
        if link_id not in self._links:
            raise UnknownLink(f"unknown link: {link_id}")
        return self._links[link_id]

    @staticmethod
    def _peak(reservations: Sequence[Reservation], start: float, end: float) -> float:
        overlapping = [r for r in reservations if r.overlaps(start, end)]
        if not overlapping:
            return 0.0
        # Load only rises at the window start or at a reservation start inside it
        instants = {start} | {r.start for r in overlapping if start < r.start < end}
        return max(sum(r.bandwidth for r in overlapping if r.active_at(t)) for t in instants)

    def peak_load(self, link_id: str, start: float, end: float) -> float:
        return self._peak(self._reservations(link_id), start, end)

    def available(self, link_id: str, start: float, end: float) -> float:
        return self.capacity[link_id] - self.peak_load(link_id, start, end)

    def query_capacity(self, link_ids: Sequence[str], start: float, end: float) -> float:
        """Minimum over links of capacity minus peak committed load in the window"""
        if not link_ids:
            return float("inf")
        return min(self.available(link_id, start, end) for link_id in link_ids)

    def commit(self, request_id: str, link_ids: Sequence[str], devices: Sequence[str],
               bandwidth: float, start: float, end: float):
        """Commit load on every link and device of a path"""
        for link_id in link_ids:
            self._reservations(link_id)
        reservations = []
        for link_id in link_ids:
            r = Reservation(request_id, bandwidth, start, end)
            self._links[link_id].append(r)
            reservations.append(r)
        for device in devices:
            r = Reservation(request_id, bandwidth, start, end)
            self._devices.setdefault(device, []).append(r)
            reservations.append(r)
        self._by_request[request_id] = reservations
        logger.debug(f"[NetworkLog] Committed {bandwidth} on {list(link_ids)} for [{start}, {end})")

    def release(self, request_id: str, at: float):
        """Release a request's load from `at` onwards"""
        for r in self._by_request.get(request_id, []):
            r.end = max(r.start, min(r.end, at))

    def load_at(self, link_id: str, t: float) -> float:
        return sum(r.bandwidth for r in self._reservations(link_id) if r.active_at(t))

    def device_load_at(self, device: str, t: float) -> float:
        return sum(r.bandwidth for r in self._devices.get(device, []) if r.active_at(t))

    def history(self, link_id: str) -> List[Reservation]:
        return list(self._reservations(link_id))

    def link_ids(self) -> List[str]:
        return list(self.capacity)

    def waitlist_head(self) -> Optional[ResourceRequest]:
        return self.waitlist[0] if self.waitlist else None
