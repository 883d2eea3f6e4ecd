import json
from collections.abc import Iterable
from typing import Any

from cryptography.hazmat.primitives import hashes


def _canonical_json(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def sha256_hex(chunks: Iterable[bytes]) -> str:
    digest = hashes.Hash(hashes.SHA256())
    for chunk in chunks:
        digest.update(chunk)
    return digest.finalize().hex()


def config_hash(*parts: Any) -> str:
    """Stable digest of JSON-serialisable config parts (physics, env, line)."""
    return sha256_hex(_canonical_json(part) for part in parts)


def verify_digest(chunks: Iterable[bytes], expected_hex: str) -> None:
    actual = sha256_hex(chunks)
    if actual != expected_hex:
        raise ValueError(f"Digest verification failed: expected {expected_hex[:12]}…, got {actual[:12]}…")
