import math
from collections import deque
from typing import Deque, List

from src.database.models import Transaction


class Mempool:
    """FIFO queue of admitted transactions with a per-second admission counter"""

    def __init__(self, max_size: int, tps_cap: int):
        self.max_size = max_size
        self.tps_cap = tps_cap
        self._queue: Deque[Transaction] = deque()
        # Admission time never moves backwards, so only the current second is counted
        self._second = -1
        self._admitted = 0

    def __len__(self) -> int:
        return len(self._queue)

    @staticmethod
    def second_of(now: float) -> int:
        return math.floor(now)

    def is_full(self) -> bool:
        return len(self._queue) >= self.max_size

    def rate_exhausted(self, now: float) -> bool:
        return self.admitted_in_second(self.second_of(now)) >= self.tps_cap

    def admitted_in_second(self, second: int) -> int:
        return self._admitted if second == self._second else 0

    def add(self, tx: Transaction, now: float):
        self._queue.append(tx)
        second = self.second_of(now)
        if second != self._second:
            self._second, self._admitted = second, 0
        self._admitted += 1

    def drain(self, limit: int) -> List[Transaction]:
        """Remove up to `limit` transactions in admission order"""
        batch = []
        while self._queue and len(batch) < limit:
            batch.append(self._queue.popleft())
        return batch

    def pending(self) -> List[Transaction]:
        return list(self._queue)
