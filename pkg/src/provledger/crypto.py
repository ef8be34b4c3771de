"""Ed25519 signing primitives and canonical digests.

Every on-ledger authorization is an Ed25519 signature over
``digest || nonce`` where ``digest`` is the SHA-256 of a canonical JSON
rendering of the signed content.  Binding the nonce into the signed
message means a captured signature cannot be replayed under a fresh
nonce.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

DIGEST_SIZE = 32
NONCE_SIZE = 16


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def canonical_json(obj: Any) -> bytes:
    """Deterministic JSON bytes: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def digest_of(obj: Any) -> bytes:
    return sha256(canonical_json(obj))


def generate_keypair(seed: bytes | None = None) -> tuple[bytes, bytes]:
    """Return (private, public) raw key bytes; seeded generation is
    deterministic, which keeps whole-ledger snapshots reproducible."""
    if seed is None:
        private = Ed25519PrivateKey.generate()
    else:
        if len(seed) != 32:
            seed = sha256(seed)
        private = Ed25519PrivateKey.from_private_bytes(seed)
    from cryptography.hazmat.primitives.serialization import (
        Encoding,
        NoEncryption,
        PrivateFormat,
        PublicFormat,
    )

    priv_bytes = private.private_bytes(
        Encoding.Raw, PrivateFormat.Raw, NoEncryption()
    )
    pub_bytes = private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return priv_bytes, pub_bytes


def sign(private_key: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(private_key).sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False
