"""Frontier: a replica's whole view, one log state per author.

Internally author-keyed so the one-log-per-author invariant holds by
construction; externally a frontier behaves as a set of logs. Updates with
invalid log states are rejected with a validity report instead of raising,
because remote states are hostile input.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from . import log as logstate
from .log import Log, LogValidityReport
from .messages import MessageStore


@dataclass(frozen=True)
class Frontier:
    """Author-sorted tuple of logs; canonical, so equality is state equality."""

    logs: tuple[Log, ...]

    def get(self, author: bytes) -> Log | None:
        for entry in self.logs:
            if entry.author == author:
                return entry
        return None

    def authors(self) -> tuple[bytes, ...]:
        return tuple(entry.author for entry in self.logs)


@dataclass(frozen=True)
class UpdateResult:
    frontier: Frontier
    accepted: bool
    report: LogValidityReport


@dataclass(frozen=True)
class FrontierValidityReport:
    valid: bool
    violated: tuple[str, ...]


def initialize() -> Frontier:
    return Frontier(())


def _with_log(frontier: Frontier, entry: Log) -> Frontier:
    kept = [l for l in frontier.logs if l.author != entry.author]
    kept.append(entry)
    kept.sort(key=lambda l: l.author)
    return Frontier(tuple(kept))


def update(store: MessageStore, frontier: Frontier, entry: Log) -> UpdateResult:
    """Merge one log state in, or add it for a previously unseen author.

    An invalid state leaves the frontier untouched and reports which
    properties failed.
    """
    report = logstate.validate(store, entry)
    if not report.valid:
        return UpdateResult(frontier, False, report)
    existing = frontier.get(entry.author)
    merged = entry if existing is None else logstate.join(store, entry, existing)
    return UpdateResult(_with_log(frontier, merged), True, report)


def leq(store: MessageStore, a: Frontier, b: Frontier) -> bool:
    """Author-set inclusion plus per-author log ordering."""
    for entry in a.logs:
        other = b.get(entry.author)
        if other is None or not logstate.leq(store, entry, other):
            return False
    return True


def join(store: MessageStore, a: Frontier, b: Frontier) -> Frontier:
    """Union of author-unique logs plus per-author joins for shared authors."""
    merged: dict[bytes, Log] = {entry.author: entry for entry in a.logs}
    for entry in b.logs:
        existing = merged.get(entry.author)
        merged[entry.author] = (
            entry if existing is None else logstate.join(store, entry, existing)
        )
    return Frontier(tuple(merged[author] for author in sorted(merged)))


def messages(store: MessageStore, frontier: Frontier) -> frozenset[bytes]:
    """Every message reachable from the frontier.

    Fork members count: branches past a shrunken last still need to be
    replicated so causal histories of depending logs stay complete.
    """
    reachable: set[bytes] = set()
    for entry in frontier.logs:
        reachable |= store.causal_history(entry.last)
        for member in entry.forks:
            reachable |= store.causal_history(member)
    return frozenset(reachable)


def check_logs(store: MessageStore, entries: Iterable[Log]) -> FrontierValidityReport:
    """F1/F2 check over a raw collection of log states (hostile input)."""
    violated: list[str] = []
    entries = list(entries)
    if any(not logstate.validate(store, entry).valid for entry in entries):
        violated.append("F1")
    authors = [entry.author for entry in entries]
    if len(set(authors)) != len(authors):
        violated.append("F2")
    return FrontierValidityReport(not violated, tuple(violated))


def snapshot_lines(frontier: Frontier) -> list[str]:
    """Canonical per-author lines: snapshot equality iff state equality."""
    lines = []
    for entry in frontier.logs:
        phase = "shrinking" if entry.forks else "growing"
        last = entry.last.hex() if entry.last is not None else "-"
        forks = ",".join(d.hex() for d in sorted(entry.forks)) or "-"
        lines.append(f"{entry.author.hex()} {phase} {last} {forks}")
    return lines


def snapshot_text(frontier: Frontier) -> str:
    return "\n".join(snapshot_lines(frontier)) + "\n"


def write_snapshot(frontier: Frontier, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(snapshot_text(frontier))
