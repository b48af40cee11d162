"""Validated content-addressed message store and its causal relations.

A message names its single same-author predecessor in ``prev`` and at most
one message per other author in ``deps``. The store only ever holds
messages that passed validation against messages already stored, which
makes the dependency graph acyclic by construction and keeps every stored
reference resolvable.

Validation labels reported on rejection:

* ``M1``  malformed previous-message reference
* ``M2``  previous message has a different author
* ``M3``  dependency missing, malformed, or by the message's own author
* ``M4``  two dependencies share an author
* ``M5``  signature does not verify
* ``M7``  dependency older than one listed earlier on the chain (strict mode)
* ``MissingDependency``  a referenced message is not stored yet; the caller
  should deliver dependencies first, this is not author misbehavior
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator

from .crypto import (
    DIGEST_LEN,
    KeyPair,
    canonical_encode,
    message_digest,
    sign,
    verify_fields,
    _frame,
    _TAG_AUTHOR,
    _TAG_DEPS,
    _TAG_PAYLOAD,
    _TAG_PREV,
    _TAG_PREV_NONE,
    _TAG_SIGNATURE,
)

MISSING_DEPENDENCY = "MissingDependency"

STORE_MAGIC = b"MSGLOG01"


@dataclass(frozen=True)
class Message:
    """Immutable signed node of the hash graph."""

    author: bytes
    prev: bytes | None
    deps: frozenset[bytes]
    payload: bytes
    signature: bytes


def msg_id(m: Message) -> bytes:
    """Collision-resistant content address of a message."""
    return message_digest(m.author, m.prev, m.deps, m.payload, m.signature)


def verify(m: Message) -> bool:
    """True iff the signature verifies over the first four fields."""
    return verify_fields(m.author, m.prev, m.deps, m.payload, m.signature)


def make_message(
    keypair: KeyPair,
    prev: bytes | None,
    deps: Iterable[bytes],
    payload: bytes,
) -> Message:
    """Build and sign a message from the keypair's author."""
    deps = frozenset(deps)
    signature = sign(keypair, prev, deps, payload)
    return Message(keypair.author, prev, deps, payload, signature)


class InsertStatus(enum.Enum):
    ACCEPTED = "accepted"
    ALREADY_PRESENT = "already_present"
    REJECTED = "rejected"


@dataclass(frozen=True)
class InsertResult:
    status: InsertStatus
    msg_id: bytes
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.status is InsertStatus.ACCEPTED

    @property
    def rejected(self) -> bool:
        return self.status is InsertStatus.REJECTED


class StoreFormatError(ValueError):
    """Raised when a store file cannot be parsed at all."""


class StoreValidationError(ValueError):
    """Raised when a parsed store record is rejected during replay."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"record {index} rejected: {reason}")
        self.index = index
        self.reason = reason


class MessageStore:
    """Append-only map from message id to validated message.

    Many readers may query concurrently; inserts must be serialized by the
    owner (single-writer contract). Every query result is an immutable
    snapshot. With ``strict_deps`` enabled, dependencies on any given author
    must never move backwards along a chain (label ``M7``).
    """

    def __init__(self, strict_deps: bool = False):
        self.strict_deps = strict_deps
        self._messages: dict[bytes, Message] = {}
        self._by_author: dict[bytes, list[bytes]] = {}
        # Memoized closures, filled at insertion time. _ancestors follows
        # prev and deps edges; _log_ancestors follows prev edges only.
        self._ancestors: dict[bytes, frozenset[bytes]] = {}
        self._log_ancestors: dict[bytes, frozenset[bytes]] = {}
        self._chain_depth: dict[bytes, int] = {}

    # -- basic access ------------------------------------------------------

    def __contains__(self, digest: bytes) -> bool:
        return digest in self._messages

    def __len__(self) -> int:
        return len(self._messages)

    def __iter__(self) -> Iterator[bytes]:
        return iter(self._messages)

    def get(self, digest: bytes) -> Message:
        m = self._messages.get(digest)
        if m is None:
            raise KeyError(f"unknown message id {digest.hex()[:16]}")
        return m

    def _require(self, digest: bytes) -> bytes:
        if digest not in self._messages:
            raise KeyError(f"unknown message id {digest.hex()[:16]}")
        return digest

    def get_optional(self, digest: bytes) -> Message | None:
        return self._messages.get(digest)

    def items(self) -> Iterator[tuple[bytes, Message]]:
        """(id, message) pairs in insertion order, which is topological."""
        return iter(self._messages.items())

    def ids_for_author(self, author: bytes) -> tuple[bytes, ...]:
        return tuple(self._by_author.get(author, ()))

    def chain_depth(self, digest: bytes) -> int:
        """Number of messages on the prev-chain ending at digest (root = 1)."""
        self.get(digest)
        return self._chain_depth[digest]

    # -- insertion ---------------------------------------------------------

    def insert(self, m: Message) -> InsertResult:
        """Validate against the current store and append if acceptable.

        Rejection never mutates the store. The signature is checked before
        anything else so that any tampering with signed fields surfaces as
        M5 rather than as a dangling reference.
        """
        mid = msg_id(m)
        if mid in self._messages:
            return InsertResult(InsertStatus.ALREADY_PRESENT, mid)

        if not verify(m):
            return InsertResult(InsertStatus.REJECTED, mid, "M5")

        if m.prev is not None:
            if m.prev not in self._messages:
                reason = "M1" if len(m.prev) != DIGEST_LEN else MISSING_DEPENDENCY
                return InsertResult(InsertStatus.REJECTED, mid, reason)
            if self._messages[m.prev].author != m.author:
                return InsertResult(InsertStatus.REJECTED, mid, "M2")

        dep_authors: set[bytes] = set()
        for dep in sorted(m.deps):
            if dep not in self._messages:
                reason = "M3" if len(dep) != DIGEST_LEN else MISSING_DEPENDENCY
                return InsertResult(InsertStatus.REJECTED, mid, reason)
            dep_author = self._messages[dep].author
            if dep_author == m.author:
                return InsertResult(InsertStatus.REJECTED, mid, "M3")
            if dep_author in dep_authors:
                return InsertResult(InsertStatus.REJECTED, mid, "M4")
            dep_authors.add(dep_author)

        if self.strict_deps and self._breaks_monotonic_deps(m):
            return InsertResult(InsertStatus.REJECTED, mid, "M7")

        ancestors: set[bytes] = set()
        for ref in ([m.prev] if m.prev is not None else []) + sorted(m.deps):
            ancestors.add(ref)
            ancestors.update(self._ancestors[ref])
        self._messages[mid] = m
        self._by_author.setdefault(m.author, []).append(mid)
        self._ancestors[mid] = frozenset(ancestors)
        if m.prev is None:
            self._log_ancestors[mid] = frozenset()
            self._chain_depth[mid] = 1
        else:
            self._log_ancestors[mid] = self._log_ancestors[m.prev] | {m.prev}
            self._chain_depth[mid] = self._chain_depth[m.prev] + 1
        return InsertResult(InsertStatus.ACCEPTED, mid)

    def _breaks_monotonic_deps(self, m: Message) -> bool:
        # For every chain ancestor listing a dependency on some author, the
        # new message's dependency on that author must not be older.
        new_deps = {self._messages[d].author: d for d in m.deps}
        cur = m.prev
        while cur is not None:
            ancestor = self._messages[cur]
            for dep in ancestor.deps:
                newer = new_deps.get(self._messages[dep].author)
                if newer is not None and not self.leq(dep, newer):
                    return True
            cur = ancestor.prev
        return False

    # -- causal relations (prev and deps edges) -----------------------------

    def happens_before(self, x: bytes | None, y: bytes) -> bool:
        """Strict causal precedence; the absent message precedes everything."""
        anc = self._ancestors[self._require(y)]
        return True if x is None else self._require(x) in anc

    def leq(self, x: bytes | None, y: bytes | None) -> bool:
        if x is not None:
            self._require(x)
        if y is not None:
            self._require(y)
        if x == y:
            return True
        if y is None:
            return False
        return x is None or x in self._ancestors[y]

    def concurrent(self, x: bytes, y: bytes) -> bool:
        return not self.leq(x, y) and not self.leq(y, x)

    def causal_history(self, x: bytes | None) -> frozenset[bytes]:
        if x is None:
            return frozenset()
        return self._ancestors[self._require(x)] | {x}

    # -- log relations (prev edges only) ------------------------------------

    def log_happens_before(self, x: bytes | None, y: bytes | None) -> bool:
        if x is not None:
            self._require(x)
        if y is None:
            return False
        chain = self._log_ancestors[self._require(y)]
        return True if x is None else x in chain

    def leq_log(self, x: bytes | None, y: bytes | None) -> bool:
        if x is not None:
            self._require(x)
        if y is not None:
            self._require(y)
        if x == y:
            return True
        if y is None:
            return False
        return x is None or x in self._log_ancestors[y]

    def concurrent_log(self, x: bytes | None, y: bytes | None) -> bool:
        return not self.leq_log(x, y) and not self.leq_log(y, x)

    def log_history(self, x: bytes | None) -> frozenset[bytes]:
        if x is None:
            return frozenset()
        return self._log_ancestors[self._require(x)] | {x}

    def log_range(self, start: bytes | None, end: bytes | None) -> frozenset[bytes]:
        """Messages on end's chain after start: history(end) minus history(start)."""
        return self.log_history(end) - self.log_history(start)

    def log_prefix(self, x: bytes | None, y: bytes | None) -> bytes | None:
        """Greatest lower bound of two messages on the same author's chain.

        Returns the absent message when either input is absent or the
        chains share no prefix (a fork at the origin).
        """
        if x is None or y is None:
            return None
        mx, my = self.get(x), self.get(y)
        if mx.author != my.author:
            raise ValueError("log prefix requires messages from one author")
        common = self.log_history(x) & self.log_history(y)
        if not common:
            return None
        return max(common, key=lambda d: self._chain_depth[d])

    def fork_proof(self, x: bytes | None, y: bytes | None) -> frozenset[bytes]:
        """Messages after the shared prefix whose prev is exactly that prefix.

        For concurrent same-author inputs this yields at least two signed
        siblings, which is irrefutable evidence of a fork. For comparable
        inputs the literal result may be empty or a singleton.
        """
        prefix = self.log_prefix(x, y)
        candidates = self.log_range(prefix, x) | self.log_range(prefix, y)
        return frozenset(d for d in candidates if self._messages[d].prev == prefix)

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        """Write length-prefixed records in insertion order."""
        with open(path, "wb") as fh:
            fh.write(STORE_MAGIC)
            for _, m in self.items():
                record = encode_message(m)
                fh.write(len(record).to_bytes(4, "big"))
                fh.write(record)

    @classmethod
    def load(cls, path, strict_deps: bool = False) -> "MessageStore":
        """Replay a store file through insert; ids come out byte-identical."""
        store = cls(strict_deps=strict_deps)
        for index, m in enumerate(read_store_records(path)):
            result = store.insert(m)
            if result.rejected:
                raise StoreValidationError(index, result.reason or "unknown")
        return store


# -- record codec ------------------------------------------------------------


def encode_message(m: Message) -> bytes:
    """Frame all five fields; SHA-256 of this byte string is the message id."""
    return canonical_encode(m.author, m.prev, m.deps, m.payload) + _frame(
        _TAG_SIGNATURE, m.signature
    )


def decode_message(record: bytes) -> Message:
    fields: list[tuple[bytes, bytes]] = []
    offset = 0
    while offset < len(record):
        if offset + 5 > len(record):
            raise StoreFormatError("truncated field header")
        tag = record[offset : offset + 1]
        length = int.from_bytes(record[offset + 1 : offset + 5], "big")
        offset += 5
        if offset + length > len(record):
            raise StoreFormatError("field length exceeds record")
        fields.append((tag, record[offset : offset + length]))
        offset += length

    expected = [_TAG_AUTHOR, (_TAG_PREV, _TAG_PREV_NONE), _TAG_DEPS, _TAG_PAYLOAD, _TAG_SIGNATURE]
    if len(fields) != len(expected):
        raise StoreFormatError(f"expected 5 fields, found {len(fields)}")
    for (tag, _), want in zip(fields, expected):
        allowed = want if isinstance(want, tuple) else (want,)
        if tag not in allowed:
            raise StoreFormatError(f"unexpected field tag {tag.hex()}")

    author = fields[0][1]
    prev = None if fields[1][0] == _TAG_PREV_NONE else fields[1][1]
    dep_blob = fields[2][1]
    if len(dep_blob) % DIGEST_LEN:
        raise StoreFormatError("dependency block is not a whole number of digests")
    deps = frozenset(
        dep_blob[i : i + DIGEST_LEN] for i in range(0, len(dep_blob), DIGEST_LEN)
    )
    if len(deps) * DIGEST_LEN != len(dep_blob):
        raise StoreFormatError("duplicate dependency digests")
    return Message(author, prev, deps, fields[3][1], fields[4][1])


def read_store_records(path) -> Iterator[Message]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(STORE_MAGIC):
        raise StoreFormatError("bad store file magic")
    offset = len(STORE_MAGIC)
    while offset < len(data):
        if offset + 4 > len(data):
            raise StoreFormatError("truncated record length")
        length = int.from_bytes(data[offset : offset + 4], "big")
        offset += 4
        if offset + length > len(data):
            raise StoreFormatError("truncated record")
        yield decode_message(data[offset : offset + length])
        offset += length
