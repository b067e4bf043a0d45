"""Line-delimited ledger dump.

Line 1 describes the ledger (authority set, cadence, contract rules). Every
following line is one block: header fields in header order, the stored header
digest, then the ordered transactions. Digests and payloads are lowercase hex.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from src.database.models import Authority, Block, BlockHeader, LedgerConfig, Transaction
from src.services.errors import DumpParseError

_SEPARATORS = (",", ":")


@dataclass
class LedgerDump:
    authorities: List[Authority]
    block_interval: float
    blocks: List[Block]
    contract_rules: Dict[str, Any] = field(default_factory=dict)

    @property
    def authority_ids(self) -> List[str]:
        return [a.pdl_id for a in self.authorities]


def _block_record(block: Block) -> dict:
    record = {"kind": "block"}
    record.update(block.header.model_dump(mode="json"))
    record["digest"] = block.digest.hex()
    record["transactions"] = [tx.model_dump(mode="json") for tx in block.transactions]
    return record


def dump_chain(chain: Sequence[Block], config: LedgerConfig, contract_rules: Optional[Dict[str, Any]] = None) -> str:
    """Serialize a chain; identical chains give identical text"""
    meta = {
        "kind": "ledger",
        "authorities": [a.model_dump() for a in config.authorities],
        "block_interval": config.block_interval,
        "tps_cap": config.tps_cap,
        "contract_rules": contract_rules or {},
    }
    lines = [json.dumps(meta, separators=_SEPARATORS, sort_keys=True)]
    lines.extend(json.dumps(_block_record(block), separators=_SEPARATORS) for block in chain)
    return "\n".join(lines) + "\n"


def load_dump(text: str) -> LedgerDump:
    """Parse a dump produced by `dump_chain`"""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DumpParseError("ledger dump is empty")

    try:
        meta = json.loads(lines[0])
        if not isinstance(meta, dict) or meta.get("kind") != "ledger":
            raise DumpParseError("line 1: missing ledger metadata record")
        authorities = [Authority(**a) for a in meta["authorities"]]
        block_interval = float(meta["block_interval"])
        contract_rules = dict(meta.get("contract_rules") or {})
    except DumpParseError:
        raise
    except (ValueError, KeyError, TypeError, ValidationError) as e:
        raise DumpParseError(f"line 1: {e}") from e

    blocks = []
    for number, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
            if not isinstance(record, dict) or record.get("kind") != "block":
                raise DumpParseError(f"line {number}: expected a block record")
            header = BlockHeader(
                height=record["height"],
                parent_digest=record["parent_digest"],
                sealer=record["sealer"],
                seal_ts=record["seal_ts"],
                tx_digest=record["tx_digest"],
            )
            txs = tuple(Transaction(**tx) for tx in record["transactions"])
            blocks.append(Block(header=header, transactions=txs, digest=record["digest"]))
        except DumpParseError:
            raise
        except (ValueError, KeyError, TypeError, AttributeError, ValidationError) as e:
            raise DumpParseError(f"line {number}: {e}") from e
    return LedgerDump(authorities, block_interval, blocks, contract_rules)
