"""Deterministic multi-replica simulation.

Replicas exchange state by anti-entropy: a sender offers every message
reachable from its frontier in topological order, then its per-author log
states, then any misbehavior proofs it holds. Authors hand fresh signed
messages to their home replicas. A single seeded generator drives all
scheduling choices, so a (scenario, seed) pair reproduces every
intermediate state bit for bit.

Each publish round is followed by a full sweep over the sync graph; after
the last publish round the engine runs twice-the-diameter quiescence
sweeps so every correct replica's state can reach every other.
"""
from __future__ import annotations

import hashlib
import random
from collections import Counter
from dataclasses import dataclass, field

from .. import frontier as frontierstate
from .. import log as logstate
from ..crypto import KeyPair
from ..messages import (
    InsertResult,
    InsertStatus,
    Message,
    MessageStore,
    make_message,
    msg_id,
    verify,
)
from .report import SimReport
from .scenario import AuthorSpec, Scenario, validate_scenario

# Rejections that prove author misbehavior: the signature verified (M5 is
# checked first), every reference resolved, and the message still broke a
# structural rule only its author controls.
ATTRIBUTABLE_REASONS = frozenset({"M1", "M2", "M3", "M4", "M7"})


def _derived_rng(seed: int, label: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass
class Replica:
    """One simulated process: message store, frontier, misbehavior records."""

    id: int
    behavior: str = "correct"
    store: MessageStore = field(default_factory=MessageStore)
    frontier: frontierstate.Frontier = field(default_factory=frontierstate.initialize)
    misbehavior: dict[bytes, Message] = field(default_factory=dict)
    counters: Counter = field(default_factory=Counter)

    def ingest(self, message: Message) -> InsertResult:
        """Store one message, keeping at most one misbehavior proof per author."""
        result = self.store.insert(message)
        if result.accepted:
            self.counters["messages_accepted"] += 1
        elif result.rejected:
            self.counters[f"rejected_{result.reason}"] += 1
            if result.reason in ATTRIBUTABLE_REASONS and message.author not in self.misbehavior:
                self.misbehavior[message.author] = message
        return result

    def receive_publish(self, message: Message) -> InsertResult:
        """Author-delivery path: store the message, then advance the log."""
        result = self.ingest(message)
        if result.status in (InsertStatus.ACCEPTED, InsertStatus.ALREADY_PRESENT):
            current = self.frontier.get(message.author) or logstate.initialize(
                message.author
            )
            advanced = logstate.append(self.store, current, result.msg_id)
            outcome = frontierstate.update(self.store, self.frontier, advanced)
            self.frontier = outcome.frontier
        return result

    def adopt_misbehavior(self, message: Message) -> None:
        """Accept a replicated misbehavior proof after checking it locally."""
        if message.author in self.misbehavior:
            return
        if not verify(message):
            return
        result = self.store.insert(message)
        if result.rejected and result.reason in ATTRIBUTABLE_REASONS:
            self.misbehavior[message.author] = message

    def snapshot(self) -> str:
        return frontierstate.snapshot_text(self.frontier)


def sync(receiver: Replica, sender: Replica) -> Replica:
    """One-directional anti-entropy exchange; the receiver only grows."""
    if sender.behavior == "omit":
        return receiver
    reachable = frontierstate.messages(sender.store, sender.frontier)
    offers = [m for digest, m in sender.store.items() if digest in reachable]
    logs = list(sender.frontier.logs)
    records = [sender.misbehavior[a] for a in sorted(sender.misbehavior)]
    if sender.behavior == "partial":
        offers = offers[::2]
        logs = logs[::2]
        records = []
    for message in offers:
        receiver.counters["messages_offered"] += 1
        receiver.ingest(message)
    for entry in logs:
        outcome = frontierstate.update(receiver.store, receiver.frontier, entry)
        receiver.frontier = outcome.frontier
        if not outcome.accepted:
            receiver.counters["logs_rejected"] += 1
    for message in records:
        receiver.adopt_misbehavior(message)
    return receiver


class AuthorActor:
    """Drives one author's key: builds, signs, and delivers messages."""

    def __init__(self, spec: AuthorSpec):
        self.spec = spec
        self.keypair = KeyPair.from_name(spec.name)
        self.chain: list[bytes] = []
        self.branch_heads: list[tuple[bytes, int]] = []
        self.first_fork_heads: list[bytes] = []
        self.fired: list[tuple[int, int]] = []
        self._plan_cursor = 0
        self._seq = 0

    @property
    def author(self) -> bytes:
        return self.keypair.author

    def _sign(self, prev: bytes | None, deps: frozenset[bytes]) -> tuple[bytes, Message]:
        self._seq += 1
        message = make_message(
            self.keypair, prev, deps, f"{self.spec.name}:{self._seq}".encode()
        )
        return msg_id(message), message

    def _deps_from_home(self, replicas: dict[int, Replica]) -> frozenset[bytes]:
        if self.spec.deps != "latest":
            return frozenset()
        home = replicas[self.spec.home[0]]
        deps: set[bytes] = set()
        for entry in home.frontier.logs:
            if entry.author == self.author or entry.last is None:
                continue
            if entry.forks:
                # A proven fork kills the log: stop recording dependencies on it.
                continue
            deps.add(entry.last)
        return frozenset(deps)

    def publish_slot(self, replicas: dict[int, Replica]) -> list[tuple[int, Message]]:
        """Produce this slot's deliveries as (replica id, message) pairs."""
        spec = self.spec
        if spec.behavior == "correct":
            prev = self.chain[-1] if self.chain else None
            digest, message = self._sign(prev, self._deps_from_home(replicas))
            self.chain.append(digest)
            return [(home, message) for home in spec.home]

        if self._plan_cursor < len(spec.fork_plan):
            at_index, branches = spec.fork_plan[self._plan_cursor]
            if len(self.chain) < at_index:
                prev = self.chain[-1] if self.chain else None
                digest, message = self._sign(prev, frozenset())
                self.chain.append(digest)
                return [(home, message) for home in spec.home]
            self._plan_cursor += 1
            self.fired.append((at_index, branches))
            prev = self.chain[at_index - 1] if at_index >= 1 else None
            deliveries: list[tuple[int, Message]] = []
            heads: list[tuple[bytes, int]] = []
            for k in range(branches):
                digest, message = self._sign(prev, frozenset())
                target = spec.home[k % len(spec.home)]
                deliveries.append((target, message))
                heads.append((digest, target))
            if not self.branch_heads:
                self.branch_heads = heads
                self.first_fork_heads = [digest for digest, _ in heads]
            return deliveries

        if spec.extend_branches and self.branch_heads:
            deliveries = []
            heads = []
            for head, target in self.branch_heads:
                digest, message = self._sign(head, frozenset())
                deliveries.append((target, message))
                heads.append((digest, target))
            self.branch_heads = heads
            return deliveries
        return []


@dataclass
class _RoundRecord:
    round_no: int
    snapshots: dict[int, str]
    # per correct replica, per author: (forked, last id, chain depth of last)
    states: dict[int, dict[bytes, tuple[bool, bytes | None, int]]]


class Simulation:
    """Executes one scenario; retains per-round history for the probes."""

    def __init__(self, scenario: Scenario, seed: int | None = None):
        validate_scenario(scenario)
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.replicas = {
            r.id: Replica(id=r.id, behavior=r.behavior, store=MessageStore(scenario.strict_deps))
            for r in scenario.replicas
        }
        self.actors = [AuthorActor(a) for a in scenario.authors]
        self.correct_ids = scenario.correct_replica_ids()
        self.edges = sorted(
            {(min(a, b), max(a, b)) for a, b in scenario.sync_graph}
        )
        self.history: list[_RoundRecord] = []
        self.detections: list[dict] = []
        self.total_rounds = 0

    # -- execution ------------------------------------------------------------

    def run(self) -> SimReport:
        for round_no in range(1, self.scenario.rounds + 1):
            self._publish_phase()
            order = list(self.edges)
            _derived_rng(self.seed, f"round:{round_no}").shuffle(order)
            self._sweep(order)
            self._record(round_no)
        quiescence = 2 * self._correct_diameter()
        for extra in range(1, quiescence + 1):
            self._sweep(self.edges)
            self._record(self.scenario.rounds + extra)
        self.total_rounds = self.scenario.rounds + quiescence
        return self._build_report()

    def _publish_phase(self) -> None:
        for actor in self.actors:
            for _ in range(self.scenario.publishes_per_round):
                for replica_id, message in actor.publish_slot(self.replicas):
                    self.replicas[replica_id].receive_publish(message)

    def _sweep(self, order: list[tuple[int, int]]) -> None:
        for a, b in order:
            sync(self.replicas[b], self.replicas[a])
            sync(self.replicas[a], self.replicas[b])

    def _record(self, round_no: int) -> None:
        snapshots = {rid: self.replicas[rid].snapshot() for rid in self.correct_ids}
        states: dict[int, dict[bytes, tuple[bool, bytes | None, int]]] = {}
        for rid in self.correct_ids:
            replica = self.replicas[rid]
            per_author: dict[bytes, tuple[bool, bytes | None, int]] = {}
            for entry in replica.frontier.logs:
                depth = (
                    replica.store.chain_depth(entry.last)
                    if entry.last is not None
                    else 0
                )
                per_author[entry.author] = (entry.forked, entry.last, depth)
            states[rid] = per_author
        record = _RoundRecord(round_no, snapshots, states)
        self._note_detections(record)
        self.history.append(record)

    def _note_detections(self, record: _RoundRecord) -> None:
        previous = self.history[-1].states if self.history else {}
        names = {actor.author: actor.spec.name for actor in self.actors}
        for rid in self.correct_ids:
            before = previous.get(rid, {})
            for author, (forked, last, _) in sorted(record.states[rid].items()):
                was_forked, was_last, _ = before.get(author, (False, None, 0))
                if forked and (not was_forked or last != was_last):
                    entry = self.replicas[rid].frontier.get(author)
                    self.detections.append(
                        {
                            "author": author.hex(),
                            "author_name": names.get(author, ""),
                            "replica": rid,
                            "round": record.round_no,
                            "last": last.hex() if last is not None else None,
                            "proof": sorted(d.hex() for d in entry.forks),
                        }
                    )

    def _correct_diameter(self) -> int:
        nodes = self.correct_ids
        adjacency: dict[int, set[int]] = {n: set() for n in nodes}
        for a, b in self.edges:
            if a in adjacency and b in adjacency:
                adjacency[a].add(b)
                adjacency[b].add(a)
        diameter = 1
        for start in nodes:
            dist = {start: 0}
            queue = [start]
            while queue:
                cur = queue.pop(0)
                for nxt in sorted(adjacency[cur]):
                    if nxt not in dist:
                        dist[nxt] = dist[cur] + 1
                        queue.append(nxt)
            diameter = max(diameter, max(dist.values()))
        return diameter

    # -- reporting --------------------------------------------------------------

    def _rounds_to_convergence(self) -> int | None:
        stable_from: int | None = None
        for record in self.history:
            values = set(record.snapshots.values())
            if len(values) == 1:
                if stable_from is None:
                    stable_from = record.round_no
            else:
                stable_from = None
        return stable_from

    def _final_converged(self) -> bool:
        if not self.history:
            return True
        return len(set(self.history[-1].snapshots.values())) == 1

    def _expected_fork_last(self, actor: AuthorActor) -> bytes | None:
        earliest = min(index for index, _ in actor.fired)
        return actor.chain[earliest - 1] if earliest >= 1 else None

    def _check_assertions(self) -> dict[str, bool]:
        checks: dict[str, bool] = {
            "correct_frontiers_identical": self._final_converged()
        }
        shrunk_ok = True
        grown_ok = True
        death_ok = True
        for actor in self.actors:
            if actor.spec.behavior == "forking" and actor.fired:
                expected = self._expected_fork_last(actor)
                for rid in self.correct_ids:
                    replica = self.replicas[rid]
                    entry = replica.frontier.get(actor.author)
                    if (
                        entry is None
                        or not entry.forked
                        or entry.last != expected
                        or not logstate.validate(replica.store, entry).valid
                    ):
                        shrunk_ok = False
                death_ok = death_ok and self._no_growth_after_propagation(actor.author)
            elif actor.spec.behavior == "correct" and actor.chain:
                if not any(h in self.correct_ids for h in actor.spec.home):
                    continue
                for rid in self.correct_ids:
                    entry = self.replicas[rid].frontier.get(actor.author)
                    if entry is None or entry.forked or entry.last != actor.chain[-1]:
                        grown_ok = False
        if any(a.spec.behavior == "forking" and a.fired for a in self.actors):
            checks["forked_logs_shrunk_to_earliest_branch_point"] = shrunk_ok
            checks["no_growth_after_full_propagation"] = death_ok
        if any(a.spec.behavior == "correct" and a.chain for a in self.actors):
            checks["correct_logs_fully_grown"] = grown_ok
        return checks

    def _no_growth_after_propagation(self, author: bytes) -> bool:
        """After every correct replica holds a proof, the last never advances."""
        propagation_round = None
        for record in self.history:
            if all(
                record.states[rid].get(author, (False, None, 0))[0]
                for rid in self.correct_ids
            ):
                propagation_round = record.round_no
                break
        if propagation_round is None:
            return False
        previous: dict[int, tuple[bool, bytes | None, int]] = {}
        for record in self.history:
            for rid in self.correct_ids:
                now = record.states[rid].get(author, (False, None, 0))
                if record.round_no > propagation_round and rid in previous:
                    was = previous[rid]
                    if not now[0]:
                        return False
                    if now[2] > was[2]:
                        return False
                previous[rid] = now
        return True

    def first_detection_round(self, author: bytes) -> int | None:
        for record in self.history:
            if any(
                record.states[rid].get(author, (False, None, 0))[0]
                for rid in self.correct_ids
            ):
                return record.round_no
        return None

    def full_propagation_round(self, author: bytes) -> int | None:
        for record in self.history:
            if all(
                record.states[rid].get(author, (False, None, 0))[0]
                for rid in self.correct_ids
            ):
                return record.round_no
        return None

    def growth_rounds_after(self, author: bytes, boundary: int) -> list[int]:
        """Rounds after the boundary in which some proof-lacking correct
        replica still advanced the author's growing log."""
        rounds: list[int] = []
        previous: dict[int, tuple[bool, bytes | None, int]] = {}
        for record in self.history:
            for rid in self.correct_ids:
                now = record.states[rid].get(author, (False, None, 0))
                was = previous.get(rid, (False, None, 0))
                if (
                    record.round_no > boundary
                    and not now[0]
                    and now[2] > was[2]
                ):
                    rounds.append(record.round_no)
                previous[rid] = now
        return sorted(set(rounds))

    def _build_report(self) -> SimReport:
        reference = self.replicas[min(self.correct_ids)]
        authors: dict[str, dict] = {}
        for actor in self.actors:
            entry = reference.frontier.get(actor.author)
            authors[actor.author.hex()] = {
                "name": actor.spec.name,
                "behavior": actor.spec.behavior,
                "chain": [d.hex() for d in actor.chain],
                "branch_heads": [d.hex() for d in actor.first_fork_heads],
                "phase": (
                    None if entry is None else ("shrinking" if entry.forked else "growing")
                ),
                "last": entry.last.hex() if entry is not None and entry.last else None,
                "forks": sorted(d.hex() for d in entry.forks) if entry is not None else [],
            }
        misbehavior = {
            str(rid): {
                author.hex(): msg_id(message).hex()
                for author, message in sorted(replica.misbehavior.items())
            }
            for rid, replica in sorted(self.replicas.items())
        }
        sync_stats: Counter = Counter()
        for replica in self.replicas.values():
            sync_stats.update(replica.counters)
        assertions = self._check_assertions()
        converged = self._final_converged()
        return SimReport(
            scenario=self.scenario.name,
            seed=self.seed,
            publish_rounds=self.scenario.rounds,
            total_rounds=self.total_rounds,
            converged=converged,
            rounds_to_convergence=self._rounds_to_convergence(),
            authors=authors,
            fork_detections=self.detections,
            misbehavior=misbehavior,
            sync_stats={k: sync_stats[k] for k in sorted(sync_stats)},
            assertions=assertions,
            final_frontier=frontierstate.snapshot_lines(reference.frontier),
        )


def run(scenario: Scenario, seed: int | None = None) -> SimReport:
    """Execute a scenario and return its report."""
    return Simulation(scenario, seed).run()


def window_probe(scenario: Scenario, seed: int | None = None) -> dict:
    """Measure how long forked logs kept growing after the first detection.

    For every forking author, reports the first round in which any correct
    replica held a proof, the round by which all of them did, the rounds in
    between where a proof-lacking replica still advanced the author's
    growing log, and whether any advance happened after full propagation
    (it never may).
    """
    simulation = Simulation(scenario, seed)
    report = simulation.run()
    probes: dict[str, dict] = {}
    for actor in simulation.actors:
        if actor.spec.behavior != "forking":
            continue
        author = actor.author
        first = simulation.first_detection_round(author)
        full = simulation.full_propagation_round(author)
        window = (
            simulation.growth_rounds_after(author, first) if first is not None else []
        )
        after_full = (
            simulation.growth_rounds_after(author, full) if full is not None else None
        )
        probes[author.hex()] = {
            "author_name": actor.spec.name,
            "first_detection_round": first,
            "full_propagation_round": full,
            "window_rounds": window,
            "window_size": len(window),
            "post_propagation_growth": bool(after_full) if after_full is not None else None,
        }
    return {
        "scenario": scenario.name,
        "seed": simulation.seed,
        "converged": report.converged,
        "probes": probes,
    }
