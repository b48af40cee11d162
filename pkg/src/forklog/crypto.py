"""Signing identities, canonical message encoding, and content addressing.

Everything a message's self-certification rests on lives here: Ed25519
keypairs (32-byte public keys, 64-byte signatures), SHA-256 digests, and a
deterministic injective byte encoding of message fields. Signatures cover
the first four fields (author, prev, deps, payload); the message digest
covers those four fields plus the signature.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

AUTHOR_LEN = 32
DIGEST_LEN = 32
SIGNATURE_LEN = 64

# Field framing tags. Each field is encoded as tag + 4-byte big-endian
# length + content, so no two distinct field tuples share an encoding.
# The absent-prev tag is distinct from any present digest, including the
# all-zero one.
_TAG_AUTHOR = b"\x01"
_TAG_PREV_NONE = b"\x02"
_TAG_PREV = b"\x03"
_TAG_DEPS = b"\x04"
_TAG_PAYLOAD = b"\x05"
_TAG_SIGNATURE = b"\x06"


class KeyMismatchError(ValueError):
    """Raised when a secret key does not pair with the claimed author."""


@dataclass(frozen=True)
class KeyPair:
    """A signing identity: public verification key plus private seed.

    The seed must never be serialized into a message or store file; only
    the public key travels.
    """

    author: bytes
    seed: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("Ed25519 seed must be exactly 32 bytes")
        private = Ed25519PrivateKey.from_private_bytes(seed)
        public = private.public_key().public_bytes_raw()
        return cls(author=public, seed=seed)

    @classmethod
    def from_name(cls, name: str) -> "KeyPair":
        """Derive a reproducible identity from a label (tests, simulations)."""
        return cls.from_seed(hashlib.sha256(b"forklog-author:" + name.encode()).digest())


def _frame(tag: bytes, body: bytes) -> bytes:
    return tag + len(body).to_bytes(4, "big") + body


def canonical_encode(
    author: bytes,
    prev: bytes | None,
    deps: Iterable[bytes],
    payload: bytes,
) -> bytes:
    """Deterministic injective encoding of the four signed fields.

    Dependencies are sorted byte-lexicographically so the encoding does not
    depend on set iteration order.
    """
    parts = [_frame(_TAG_AUTHOR, author)]
    if prev is None:
        parts.append(_frame(_TAG_PREV_NONE, b""))
    else:
        parts.append(_frame(_TAG_PREV, prev))
    parts.append(_frame(_TAG_DEPS, b"".join(sorted(deps))))
    parts.append(_frame(_TAG_PAYLOAD, payload))
    return b"".join(parts)


def sign(
    keypair: KeyPair,
    prev: bytes | None,
    deps: Iterable[bytes],
    payload: bytes,
) -> bytes:
    """Sign the canonical encoding of the fields under the keypair's author."""
    private = Ed25519PrivateKey.from_private_bytes(keypair.seed)
    if private.public_key().public_bytes_raw() != keypair.author:
        raise KeyMismatchError("secret seed does not pair with the claimed author")
    return private.sign(canonical_encode(keypair.author, prev, deps, payload))


def verify_fields(
    author: bytes,
    prev: bytes | None,
    deps: Iterable[bytes],
    payload: bytes,
    signature: bytes,
) -> bool:
    """True iff signature verifies over the canonical field encoding.

    Total over hostile input: malformed keys or signature bytes return
    False rather than raising.
    """
    try:
        public = Ed25519PublicKey.from_public_bytes(author)
        public.verify(signature, canonical_encode(author, prev, deps, payload))
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def message_digest(
    author: bytes,
    prev: bytes | None,
    deps: Iterable[bytes],
    payload: bytes,
    signature: bytes,
) -> bytes:
    """Content address of a complete message: SHA-256 over all five fields."""
    return hashlib.sha256(
        canonical_encode(author, prev, deps, payload) + _frame(_TAG_SIGNATURE, signature)
    ).digest()


def vector_line(
    author: bytes,
    prev: bytes | None,
    deps: Iterable[bytes],
    payload: bytes,
    signature: bytes,
) -> str:
    """One golden-vector record: id, author, prev, deps, payload, signature.

    Fields are hex, space-separated; absent or empty fields render as "-";
    deps are comma-joined in sorted order.
    """
    digest = message_digest(author, prev, deps, payload, signature)
    dep_field = ",".join(d.hex() for d in sorted(deps)) or "-"
    return " ".join(
        [
            digest.hex(),
            author.hex(),
            prev.hex() if prev is not None else "-",
            dep_field,
            payload.hex() or "-",
            signature.hex(),
        ]
    )
