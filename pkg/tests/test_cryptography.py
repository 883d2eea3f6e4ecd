import pytest

from src.cryptography import config_hash, sha256_hex, verify_digest


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}, {"x": 0.5}) == config_hash({"b": [1, 2], "a": 1}, {"x": 0.5})


def test_config_hash_sees_every_part():
    base = config_hash({"a": 1}, {"x": 0.5})
    assert config_hash({"a": 1}, {"x": 0.25}) != base
    assert config_hash({"a": 1}) != base


def test_sha256_of_known_input():
    assert sha256_hex([b"ab", b"c"]) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_verify_digest():
    chunks = [b"param.w", b"(2,)", b"\x00" * 16]
    verify_digest(chunks, sha256_hex(chunks))
    with pytest.raises(ValueError):
        verify_digest(chunks, "0" * 64)
