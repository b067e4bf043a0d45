from .ledger_service import Ledger
from .chain_verifier import verify_chain
from .ledger_dump import LedgerDump, dump_chain, load_dump

__all__ = ["Ledger", "LedgerDump", "verify_chain", "dump_chain", "load_dump"]
