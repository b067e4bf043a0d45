import hashlib
import json
from typing import Any

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)

# Governance may pick the flow-record digest; every option yields 32 bytes
RECORD_DIGEST_ALGORITHMS = ("sha3_256", "sha256", "blake2s")


def sha3_256(data: bytes) -> bytes:
    """SHA3-256 digest used for headers, addresses and default flow records"""
    return hashlib.sha3_256(data).digest()


def record_digest(data: bytes, algorithm: str = "sha3_256") -> bytes:
    """Digest a canonical flow preimage with the governance-selected algorithm"""
    if algorithm not in RECORD_DIGEST_ALGORITHMS:
        raise ValueError(f"Unsupported record digest algorithm: {algorithm}")
    return hashlib.new(algorithm, data).digest()


def canonical_json(value: Any) -> bytes:
    """Stable byte encoding for hashing structured values"""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")
