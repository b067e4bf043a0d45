import logging
from typing import Optional, Sequence

from src.database.models import Block, ChainCheck, ChainVerdict, transactions_digest
from src.services.crypto.hashing import ZERO_DIGEST

logger = logging.getLogger(__name__)


def _check_block(block: Block, index: int, parent: Optional[Block], authorities: Sequence[str]) -> Optional[ChainCheck]:
    header = block.header
    if parent is None:
        if header.height != 0:
            return ChainCheck.HEIGHT
        if header.parent_digest != ZERO_DIGEST:
            return ChainCheck.PARENT_DIGEST
    else:
        if header.height != parent.header.height + 1:
            return ChainCheck.HEIGHT
        if header.parent_digest != parent.header.digest():
            return ChainCheck.PARENT_DIGEST
    if header.tx_digest != transactions_digest(block.transactions):
        return ChainCheck.TX_DIGEST
    if header.sealer not in authorities:
        return ChainCheck.SEALER_MEMBERSHIP
    if header.sealer != authorities[index % len(authorities)]:
        return ChainCheck.SEALER_ROTATION
    if block.digest != header.digest():
        return ChainCheck.HEADER_DIGEST
    return None


def verify_chain(chain: Sequence[Block], authorities: Sequence[str]) -> ChainVerdict:
    """Check hash links, digests, height succession and sealer rotation"""
    if not chain:
        return ChainVerdict(valid=False, height=None, check=ChainCheck.EMPTY, detail="chain is empty")
    if not authorities:
        return ChainVerdict(valid=False, height=0, check=ChainCheck.SEALER_MEMBERSHIP, detail="no authorities")

    parent = None
    for index, block in enumerate(chain):
        try:
            failed = _check_block(block, index, parent, authorities)
        except Exception as e:
            # Malformed blocks are reported, never raised
            logger.warning(f"[ChainVerifier] Malformed block at index {index}: {e}")
            return ChainVerdict(valid=False, height=index, check=ChainCheck.MALFORMED, detail=str(e))
        if failed is not None:
            return ChainVerdict(
                valid=False,
                height=index,
                check=failed,
                detail=f"{failed.value} check failed at height {index}"
            )
        parent = block
    return ChainVerdict(valid=True)
