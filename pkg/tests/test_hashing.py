import random

import pytest
from Crypto.Hash import SHA3_256

from src.database.models import FlowPreimage
from src.services.crypto.hashing import DIGEST_SIZE, canonical_json, record_digest, sha3_256


@pytest.mark.parametrize("message, expected", [
    (b"", "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"),
    (b"abc", "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532"),
    (b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
     "41c0dba2a9d6240849100376a8235e2c82e1b9998a999e21db32dd97496d3376"),
    (b"abcdefghbcdefghicdefghijdefghijkefghijklfghijklmghijklmnhijklmnoijklmnopjklmnopqklmnopqrlmnopqrsmnopqrstnopqrstu",
     "916f6061fe879741ca6469b43971dfdb28b1a32dc36cb3254e812be27aad1d18"),
])
def test_sha3_256_known_vectors(message, expected):
    assert sha3_256(message).hex() == expected


def test_record_digest_matches_independent_sha3():
    preimage = FlowPreimage(node_id="N1", src_ip="10.0.0.1", dst_ip="10.0.0.2", timestamp=5000)
    encoded = preimage.encode()

    assert encoded == b"N1|10.0.0.1|10.0.0.2|5000"
    assert record_digest(encoded) == SHA3_256.new(data=encoded).digest()


def test_preimage_encoding_is_ascii_and_bounded():
    preimage = FlowPreimage(
        node_id="pdl-0006", src_ip="192.168.100.100", dst_ip="192.168.100.200", timestamp=1609459214000
    )
    encoded = preimage.encode()

    assert encoded.decode("ascii") == "pdl-0006|192.168.100.100|192.168.100.200|1609459214000"
    assert len(encoded) <= 64
    assert FlowPreimage.decode(encoded.decode("ascii")) == preimage


FIXED_PREIMAGES = [
    FlowPreimage(node_id=f"pdl-{n:04d}", src_ip=f"192.168.{n}.{2 * n}", dst_ip=f"10.{n}.0.{255 - n}",
                 timestamp=1609459200000 + 997 * n)
    for n in range(1, 21)
]


@pytest.mark.parametrize("preimage", FIXED_PREIMAGES, ids=lambda p: p.node_id)
def test_fixed_preimages_match_independent_sha3(preimage):
    encoded = preimage.encode()
    assert record_digest(encoded) == SHA3_256.new(data=encoded).digest()
    assert FlowPreimage.decode(encoded.decode("ascii")) == preimage


def test_realistic_encodings_fit_expected_size():
    rng = random.Random(5)
    epoch = 1609459200000
    for _ in range(1000):
        preimage = FlowPreimage(
            node_id=f"pdl-{rng.randint(1, 9999):04d}",
            src_ip=f"192.168.{rng.randint(0, 255)}.{rng.randint(0, 255)}",
            dst_ip=f"192.168.{rng.randint(0, 255)}.{rng.randint(0, 255)}",
            timestamp=epoch + rng.randint(0, 10 ** 9),
        )
        assert 46 <= len(preimage.encode()) <= 56, preimage


@pytest.mark.parametrize("encoded", ["a|b|c", "N1|10.0.0.1|10.0.0.2|-5", "N1|10.0.0.1|10.0.0.2|x"])
def test_preimage_decode_rejects_noncanonical(encoded):
    with pytest.raises(ValueError):
        FlowPreimage.decode(encoded)


@pytest.mark.parametrize("algorithm", ["sha3_256", "sha256", "blake2s"])
def test_record_digest_algorithms_are_32_bytes(algorithm):
    assert len(record_digest(b"N1|10.0.0.1|10.0.0.2|5000", algorithm)) == DIGEST_SIZE


def test_record_digest_rejects_unknown_algorithm():
    with pytest.raises(ValueError):
        record_digest(b"x", "md5")


def test_canonical_json_ignores_key_order():
    assert canonical_json({"b": 1, "a": [1, 2]}) == canonical_json({"a": [1, 2], "b": 1})
    assert canonical_json({"a": 1}) == b'{"a":1}'
