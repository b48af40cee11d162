"""Two-phase per-author log state: grow until a fork is proven, then shrink.

A log carries its author's latest strictly sequential message in ``last``
and, once equivocation has been observed, a set of signed sibling messages
in ``forks`` that all extend ``last``. The phase is encoded by whether
``forks`` is empty; a log that has entered the shrinking phase never
returns to growing, and further fork evidence only moves ``last`` earlier.

Validity labels for the growing phase are CL1..CL3, for the shrinking
phase FL1..FL7; hostile states fail with the full list of violated labels
rather than raising.
"""
from __future__ import annotations

from dataclasses import dataclass

from .messages import MessageStore


@dataclass(frozen=True)
class Log:
    author: bytes
    last: bytes | None
    forks: frozenset[bytes]

    @property
    def forked(self) -> bool:
        return bool(self.forks)


@dataclass(frozen=True)
class LogValidityReport:
    valid: bool
    violated: tuple[str, ...]


def initialize(author: bytes) -> Log:
    """A fresh growing log with no last message."""
    return Log(author, None, frozenset())


def append(store: MessageStore, log: Log, digest: bytes) -> Log:
    """Advance the log with one stored message from its author.

    Growing phase: a successor of ``last`` becomes the new last; anything
    already covered is ignored; a concurrent message is fork evidence.
    Shrinking phase: only messages concurrent with ``last`` matter, and
    they move ``last`` back to the shared prefix with a fresh proof.
    """
    message = store.get(digest)
    if message.author != log.author:
        raise ValueError("appended message is not from the log's author")

    if not log.forks:
        if store.log_happens_before(log.last, digest):
            return Log(log.author, digest, frozenset())
        if store.leq_log(digest, log.last):
            return log
    elif not store.concurrent_log(digest, log.last):
        return log

    # Fork handling: the proof replaces any previous one because older
    # fork members no longer extend the new, earlier last.
    return Log(
        log.author,
        store.log_prefix(log.last, digest),
        store.fork_proof(log.last, digest),
    )


def leq(store: MessageStore, a: Log, b: Log) -> bool:
    """Partial order on same-author log states.

    Growing states compare by their lasts. A shrinking state dominates a
    growing one whose last lies on a branch the proof's last can reach:
    states whose lasts sit on different branches stay incomparable, which
    is exactly the relation the merge computes least upper bounds for. A
    shrinking state never sits below a growing one, and shrinking states
    compare by reversed lasts, since evidence of an earlier fork is more
    information.
    """
    if a.author != b.author:
        raise ValueError("log states of different authors are incomparable")
    if not a.forks and not b.forks:
        return store.leq_log(a.last, b.last)
    if not a.forks:
        return not store.concurrent_log(a.last, b.last)
    if not b.forks:
        return False
    return store.leq_log(b.last, a.last)


def join(store: MessageStore, a: Log, b: Log) -> Log:
    """Least upper bound of two same-author log states."""
    if a.author != b.author:
        raise ValueError("cannot join log states of different authors")
    if not store.concurrent_log(a.last, b.last):
        if not a.forks and not b.forks:
            return b if store.leq_log(a.last, b.last) else a
        if a.forks and not b.forks:
            return a
        if not a.forks and b.forks:
            return b
    # Concurrent lasts, or both sides already hold fork proofs: shrink to
    # the common prefix and keep every known sibling that extends it.
    last = store.log_prefix(a.last, b.last)
    pool = store.fork_proof(a.last, b.last) | a.forks | b.forks
    forks = frozenset(d for d in pool if store.get(d).prev == last)
    return Log(a.author, last, forks)


def validate(store: MessageStore, log: Log) -> LogValidityReport:
    """Check CL (growing) or FL (shrinking) properties on a hostile state."""
    violated: list[str] = []
    if not log.forks:
        if log.last is not None:
            last = store.get_optional(log.last)
            if last is None:
                violated.append("CL2")
            elif last.author != log.author:
                violated.append("CL3")
    else:
        if log.last is not None:
            last = store.get_optional(log.last)
            if last is None:
                violated.append("FL2")
            elif last.author != log.author:
                violated.append("FL3")
        members = {d: store.get_optional(d) for d in sorted(log.forks)}
        stored = {d: m for d, m in members.items() if m is not None}
        if len(stored) < len(members):
            violated.append("FL4")
        if any(m.author != log.author for m in stored.values()):
            violated.append("FL5")
        for d, m in stored.items():
            if not any(o != d and om.prev == m.prev for o, om in stored.items()):
                violated.append("FL6")
                break
        if any(m.prev != log.last for m in stored.values()):
            violated.append("FL7")
    return LogValidityReport(not violated, tuple(violated))


def trim_forks(log: Log, keep: int = 2) -> Log:
    """Optional normalization: retain only the lowest fork digests.

    Any two siblings of a valid shrinking state already prove the fork, so
    the rest may be dropped. Not applied anywhere by default; joins keep
    full sets so merge results stay reproducible without coordination.
    """
    if len(log.forks) <= keep:
        return log
    return Log(log.author, log.last, frozenset(sorted(log.forks)[:keep]))


def render(log: Log) -> str:
    """Debug rendering, not a wire format."""
    last = log.last.hex() if log.last is not None else "-"
    if not log.forks:
        return f"{log.author.hex()} [growing last={last}]"
    forks = ",".join(d.hex() for d in sorted(log.forks))
    return f"{log.author.hex()} [shrinking last={last} forks={{{forks}}}]"
