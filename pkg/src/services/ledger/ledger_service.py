"""
PERMISSIONED LEDGER
===================

Append-only, hash-chained ledger sealed by a fixed authority set.

1. Admission
   - Only registered (and not revoked) participants may submit
   - Nonces are per-submitter counters starting at 0, strictly next-in-sequence
   - At most tps_cap admissions per simulated second
   - At most mempool_cap pending transactions
   Checks run in that order; the first failing one is the rejection reason.

2. Sealing
   - A block is due once block_interval has elapsed since the tip
   - The sealer of height h is authorities[h mod k] (strict in-turn rotation)
   - Each block drains up to batch_size transactions FIFO; empty blocks are sealed

3. Listeners
   - Admission listeners see every admitted transaction in admission order
   - Commit listeners see every sealed block in height order
"""

import logging
from collections import Counter
from typing import Callable, Dict, List, Optional, Set, Tuple

from src.database.models import (
    Admission,
    Block,
    BlockHeader,
    LedgerConfig,
    RejectReason,
    Transaction,
    transactions_digest,
)
from src.services.crypto.hashing import ZERO_DIGEST
from src.services.errors import InvalidTransaction, RangeBeyondTip
from src.services.logging.sim_logger import SimLogger
from .mempool import Mempool

logger = logging.getLogger(__name__)

# Tolerance for float drift in seal times
_CLOCK_EPSILON = 1e-9

AdmissionListener = Callable[[Transaction, float], None]
CommitListener = Callable[[Block], None]


def seal(height: int, parent_digest: bytes, sealer: str, seal_ts: float, transactions) -> Block:
    """Build a block with its header digests filled in"""
    txs = tuple(transactions)
    header = BlockHeader(
        height=height,
        parent_digest=parent_digest,
        sealer=sealer,
        seal_ts=seal_ts,
        tx_digest=transactions_digest(txs),
    )
    return Block(header=header, transactions=txs, digest=header.digest())


class Ledger:
    """Single-writer ledger driven by the simulation event loop"""

    def __init__(self, config: LedgerConfig):
        self.config = config
        self.authority_ids = [a.pdl_id for a in config.authorities]
        self.mempool = Mempool(config.mempool_cap, config.tps_cap)
        self.events = SimLogger()

        self._participants: Set[str] = set()
        self._revoked: Set[str] = set()
        self._next_nonce: Dict[str, int] = {}
        self._committed: List[Tuple[Transaction, int]] = []
        self._admission_listeners: List[AdmissionListener] = []
        self._commit_listeners: List[CommitListener] = []

        self.admitted_count = 0
        self.rejections: Counter = Counter()

        genesis = seal(0, ZERO_DIGEST, self.authority_ids[0], 0.0, ())
        self._chain: List[Block] = [genesis]

    # -- membership -------------------------------------------------------

    def register(self, pdl_id: str):
        """Allow a participant to submit transactions"""
        self._participants.add(pdl_id)

    def revoke(self, pdl_id: str):
        """Bar a participant from further submissions; its history stays on chain"""
        self._revoked.add(pdl_id)
        self.events.ledger_event("revoked", {"pdl_id": pdl_id})

    def is_permitted(self, pdl_id: str) -> bool:
        return pdl_id in self._participants and pdl_id not in self._revoked

    def next_nonce(self, pdl_id: str) -> int:
        return self._next_nonce.get(pdl_id, 0)

    def add_admission_listener(self, listener: AdmissionListener):
        self._admission_listeners.append(listener)

    def add_commit_listener(self, listener: CommitListener):
        self._commit_listeners.append(listener)

    # -- operations -------------------------------------------------------

    def submit_transaction(self, tx: Transaction, now: float) -> Admission:
        """Admit a transaction into the mempool or reject it with a reason"""
        if len(tx.payload) > self.config.max_payload:
            raise InvalidTransaction(
                f"payload of {len(tx.payload)} bytes exceeds {self.config.max_payload}"
            )

        reason: Optional[RejectReason] = None
        if not self.is_permitted(tx.submitter):
            reason = RejectReason.UNAUTHORIZED
        elif tx.nonce != self.next_nonce(tx.submitter):
            reason = RejectReason.BAD_NONCE
        elif self.mempool.rate_exhausted(now):
            reason = RejectReason.RATE_CAPPED
        elif self.mempool.is_full():
            reason = RejectReason.MEMPOOL_FULL

        if reason is not None:
            self.rejections[reason.value] += 1
            self.events.ledger_event("rejected", {
                "submitter": tx.submitter,
                "nonce": tx.nonce,
                "reason": reason.value,
                "now": now
            })
            return Admission.rejected(reason)

        self.mempool.add(tx, now)
        self._next_nonce[tx.submitter] = tx.nonce + 1
        self.admitted_count += 1
        for listener in self._admission_listeners:
            listener(tx, now)
        return Admission.ok()

    def seal_block(self, now: float) -> Optional[Block]:
        """Seal the next block if due; None means NotDue"""
        tip = self._chain[-1]
        if now - tip.header.seal_ts < self.config.block_interval - _CLOCK_EPSILON:
            return None

        height = tip.height + 1
        sealer = self.authority_ids[height % len(self.authority_ids)]
        batch = self.mempool.drain(self.config.effective_batch_size)
        block = seal(height, tip.header.digest(), sealer, now, batch)
        self._chain.append(block)
        for tx in block.transactions:
            self._committed.append((tx, height))

        self.events.ledger_event("sealed", {
            "height": height,
            "sealer": sealer,
            "seal_ts": now,
            "transactions": len(batch),
            "pending": len(self.mempool)
        })
        for listener in self._commit_listeners:
            listener(block)
        return block

    def query_records(self, contract: str, start: int, end: int) -> List[Tuple[Transaction, int]]:
        """Committed transactions addressed to `contract` within heights [start, end]"""
        if start < 0 or end < start or end > self.tip_height:
            raise RangeBeyondTip(f"range [{start}, {end}] outside chain tip {self.tip_height}")
        return [
            (tx, height) for tx, height in self._committed
            if start <= height <= end and tx.contract == contract
        ]

    # -- views ------------------------------------------------------------

    @property
    def chain(self) -> Tuple[Block, ...]:
        return tuple(self._chain)

    @property
    def tip(self) -> Block:
        return self._chain[-1]

    @property
    def tip_height(self) -> int:
        return self._chain[-1].height

    @property
    def committed(self) -> List[Tuple[Transaction, int]]:
        return list(self._committed)

    @property
    def pending_count(self) -> int:
        return len(self.mempool)
