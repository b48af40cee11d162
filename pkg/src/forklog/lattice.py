"""Exhaustive and randomized lattice law checks.

The log and frontier states must form a partial order whose merge computes
the least upper bound, with every state-changing operation monotonic and
validity-preserving. This module checks those laws directly:

* every prev-forest shape with up to ``max_msgs`` messages is enumerated
  (deduplicated up to isomorphism, which relabels payloads only), and every
  valid log state over each forest is built explicitly;
* order laws are verified on the full state space per forest, and the merge
  result is compared against the brute-force least upper bound derived from
  the order relation alone;
* frontiers are sampled from per-author state spaces and checked the same
  way, per author;
* message-level orders are checked both on the forests and on randomized
  multi-author dependency graphs.

``leq_l_fn`` and ``join_l_fn`` exist so tests can inject a deliberately
broken rule and confirm the checks catch it.
"""
from __future__ import annotations

import itertools
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import frontier as frontierstate
from . import log as logstate
from .crypto import KeyPair
from .frontier import Frontier
from .log import Log
from .messages import MessageStore, make_message

LeqFn = Callable[[MessageStore, Log, Log], bool]
JoinFn = Callable[[MessageStore, Log, Log], Log]


@dataclass(frozen=True)
class LawViolation:
    section: str
    law: str
    detail: str


@dataclass
class LatticeReport:
    max_msgs: int
    max_authors: int
    stores: int = 0
    log_states: int = 0
    log_pairs: int = 0
    message_elements: int = 0
    frontier_pairs: int = 0
    frontier_triples: int = 0
    violations: list[LawViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        status = "ok" if self.ok else f"{len(self.violations)} violation(s)"
        return (
            f"lattice checks: {status}; forests={self.stores} "
            f"log_states={self.log_states} log_pairs={self.log_pairs} "
            f"message_elements={self.message_elements} "
            f"frontier_pairs={self.frontier_pairs} "
            f"frontier_triples={self.frontier_triples}"
        )


# -- enumeration --------------------------------------------------------------


def enumerate_forests(max_nodes: int) -> list[tuple[int | None, ...]]:
    """All prev-forest shapes with up to max_nodes messages, one per isomorphism class.

    A shape is a parent vector: node i points at an earlier node or at
    nothing (a root). Isomorphic shapes differ only in payload labelling,
    which no ordering or merge rule can observe.
    """
    shapes: list[tuple[int | None, ...]] = []
    seen: set[str] = set()
    for n in range(max_nodes + 1):
        choices: list[list[int | None]] = [
            [None] + list(range(i)) for i in range(n)
        ]
        for parents in itertools.product(*choices):
            key = _shape_key(parents)
            if key not in seen:
                seen.add(key)
                shapes.append(parents)
    return shapes


def _shape_key(parents: Sequence[int | None]) -> str:
    children: dict[int | None, list[int]] = defaultdict(list)
    for i, p in enumerate(parents):
        children[p].append(i)

    def sub(node: int) -> str:
        return "(" + "".join(sorted(sub(c) for c in children.get(node, []))) + ")"

    return "".join(sorted(sub(r) for r in children.get(None, [])))


def build_forest_store(
    parents: Sequence[int | None], keypair: KeyPair, store: MessageStore | None = None
) -> tuple[MessageStore, list[bytes]]:
    """Realize a parent vector as signed messages from one author."""
    store = store if store is not None else MessageStore()
    ids: list[bytes] = []
    for i, p in enumerate(parents):
        prev = ids[p] if p is not None else None
        m = make_message(keypair, prev, frozenset(), f"m{i}".encode())
        result = store.insert(m)
        if not result.accepted:
            raise RuntimeError(f"forest message rejected: {result.reason}")
        ids.append(result.msg_id)
    return store, ids


def enumerate_log_states(store: MessageStore, author: bytes, ids: Sequence[bytes]) -> list[Log]:
    """Every valid log state whose references live in the given chain set."""
    states: list[Log] = []
    anchors: list[bytes | None] = [None] + list(ids)
    for anchor in anchors:
        states.append(Log(author, anchor, frozenset()))
    for anchor in anchors:
        siblings = sorted(d for d in ids if store.get(d).prev == anchor)
        for size in range(2, len(siblings) + 1):
            for combo in itertools.combinations(siblings, size):
                states.append(Log(author, anchor, frozenset(combo)))
    return states


def random_store(
    rng: random.Random, n_msgs: int, n_authors: int, label: str = "rand"
) -> tuple[MessageStore, list[bytes]]:
    """Randomized multi-author store with chains, forks, and dependencies."""
    keypairs = [KeyPair.from_name(f"{label}-{k}") for k in range(n_authors)]
    store = MessageStore()
    ids: list[bytes] = []
    by_author: dict[bytes, list[bytes]] = {kp.author: [] for kp in keypairs}
    for i in range(n_msgs):
        kp = keypairs[rng.randrange(n_authors)]
        own = by_author[kp.author]
        # Mostly extend the head; sometimes branch from an older message.
        if not own:
            prev = None
        elif rng.random() < 0.75:
            prev = own[-1]
        else:
            prev = rng.choice([None] + own)
        deps: set[bytes] = set()
        for other in keypairs:
            if other.author == kp.author or not by_author[other.author]:
                continue
            if rng.random() < 0.4:
                deps.add(rng.choice(by_author[other.author]))
        m = make_message(kp, prev, frozenset(deps), f"{label}-{i}".encode())
        result = store.insert(m)
        if not result.accepted:
            raise RuntimeError(f"random store message rejected: {result.reason}")
        ids.append(result.msg_id)
        by_author[kp.author].append(result.msg_id)
    return store, ids


# -- order-law helpers ---------------------------------------------------------


def _order_masks(size: int, leq_at: Callable[[int, int], bool]) -> list[int]:
    masks = [0] * size
    for i in range(size):
        row = 0
        for j in range(size):
            if leq_at(i, j):
                row |= 1 << j
        masks[i] = row
    return masks


def _check_order_laws(
    masks: list[int],
    same_class: Callable[[int, int], bool],
    section: str,
    describe: Callable[[int], str],
    violations: list[LawViolation],
) -> None:
    size = len(masks)
    full = (1 << size) - 1
    for i in range(size):
        if not masks[i] >> i & 1:
            violations.append(LawViolation(section, "reflexive", describe(i)))
        for j in range(size):
            if not masks[i] >> j & 1:
                continue
            # transitivity: everything above j must be above i
            if masks[j] & ~masks[i] & full:
                violations.append(
                    LawViolation(section, "transitive", f"{describe(i)} <= {describe(j)}")
                )
            if masks[j] >> i & 1 and not same_class(i, j):
                violations.append(
                    LawViolation(
                        section, "antisymmetric", f"{describe(i)} ~ {describe(j)}"
                    )
                )


# -- log-state section ---------------------------------------------------------


def _log_class(state: Log) -> tuple[bool, bytes | None]:
    # Shrinking states with equal last are mutually <= regardless of fork
    # sets, so order laws hold modulo this quotient.
    return (bool(state.forks), state.last)


def _check_log_section(
    store: MessageStore,
    author: bytes,
    ids: Sequence[bytes],
    leq_fn: LeqFn,
    join_fn: JoinFn,
    report: LatticeReport,
) -> None:
    states = enumerate_log_states(store, author, ids)
    size = len(states)
    index = {(s.last, s.forks): i for i, s in enumerate(states)}
    violations = report.violations
    report.log_states += size
    report.log_pairs += size * size

    def describe(i: int) -> str:
        return logstate.render(states[i])

    for state in states:
        check = logstate.validate(store, state)
        if not check.valid:
            violations.append(
                LawViolation("log", "enumerated-state-valid", logstate.render(state))
            )

    masks = _order_masks(size, lambda i, j: leq_fn(store, states[i], states[j]))
    _check_order_laws(
        masks,
        lambda i, j: _log_class(states[i]) == _log_class(states[j]),
        "log",
        describe,
        violations,
    )

    # Merge table. Every result must be one of the enumerated valid states.
    table = [[0] * size for _ in range(size)]
    for i in range(size):
        for j in range(size):
            merged = join_fn(store, states[i], states[j])
            if not logstate.validate(store, merged).valid:
                violations.append(
                    LawViolation("log", "join-valid", f"{describe(i)} | {describe(j)}")
                )
            k = index.get((merged.last, merged.forks))
            if k is None:
                violations.append(
                    LawViolation("log", "join-closure", f"{describe(i)} | {describe(j)}")
                )
                k = i
            table[i][j] = k

    for i in range(size):
        if table[i][i] != i:
            violations.append(LawViolation("log", "join-idempotent", describe(i)))
        for j in range(size):
            k = table[i][j]
            if k != table[j][i]:
                violations.append(
                    LawViolation("log", "join-commutative", f"{describe(i)} | {describe(j)}")
                )
            if not (masks[i] >> k & 1 and masks[j] >> k & 1):
                violations.append(
                    LawViolation("log", "join-upper-bound", f"{describe(i)} | {describe(j)}")
                )
            upper = masks[i] & masks[j]
            if upper & ~masks[k]:
                violations.append(
                    LawViolation("log", "join-least", f"{describe(i)} | {describe(j)}")
                )

    # Associativity holds modulo the fork-set quotient: shrinking states
    # with equal last are mutually <= whatever their fork sets hold, and a
    # merge against an already-shrunk state legitimately returns it
    # unchanged rather than unioning in further siblings.
    classes = [_log_class(s) for s in states]
    for i in range(size):
        row = table[i]
        for j in range(size):
            row_j = table[j]
            t_ij = row[j]
            for k in range(size):
                if classes[table[t_ij][k]] != classes[row[row_j[k]]]:
                    violations.append(
                        LawViolation(
                            "log",
                            "join-associative",
                            f"{describe(i)} | {describe(j)} | {describe(k)}",
                        )
                    )

    # Append monotonicity, phase trapdoor, and shrink direction.
    for i, state in enumerate(states):
        for digest in ids:
            result = logstate.append(store, state, digest)
            if not logstate.validate(store, result).valid:
                violations.append(
                    LawViolation("log", "append-valid", f"{describe(i)} + {digest.hex()[:8]}")
                )
            k = index.get((result.last, result.forks))
            if k is None or not masks[i] >> k & 1:
                violations.append(
                    LawViolation(
                        "log", "append-monotone", f"{describe(i)} + {digest.hex()[:8]}"
                    )
                )
                continue
            if state.forks and not result.forks:
                violations.append(
                    LawViolation("log", "phase-trapdoor", f"{describe(i)} + {digest.hex()[:8]}")
                )
            if state.forks and result.last != state.last:
                if not store.log_happens_before(result.last, state.last):
                    violations.append(
                        LawViolation(
                            "log", "shrink-direction", f"{describe(i)} + {digest.hex()[:8]}"
                        )
                    )


# -- message-order section ------------------------------------------------------


def _check_message_orders(
    store: MessageStore, ids: Sequence[bytes], section: str, report: LatticeReport
) -> None:
    elements: list[bytes | None] = [None] + list(ids)
    size = len(elements)
    report.message_elements += size

    def describe(i: int) -> str:
        e = elements[i]
        return e.hex()[:8] if e is not None else "-"

    for name, rel in (("causal", store.leq), ("chain", store.leq_log)):
        masks = _order_masks(size, lambda i, j: rel(elements[i], elements[j]))
        _check_order_laws(
            masks,
            lambda i, j: i == j,
            f"{section}:{name}",
            describe,
            report.violations,
        )


# -- frontier section -------------------------------------------------------------


def _frontier_class(f: Frontier) -> tuple:
    return tuple((l.author, bool(l.forks), l.last) for l in f.logs)


def _check_frontier_section(
    max_authors: int,
    per_author_msgs: int,
    pairs: int,
    triples: int,
    seed: int,
    leq_fn: LeqFn,
    report: LatticeReport,
) -> None:
    rng = random.Random(seed)
    violations = report.violations
    worlds = 4
    for w in range(worlds):
        store = MessageStore()
        spaces: list[tuple[bytes, list[Log], list[int], dict]] = []
        for k in range(max_authors):
            kp = KeyPair.from_name(f"lattice-w{w}-a{k}")
            n = rng.randint(1, per_author_msgs) if per_author_msgs else 0
            parents = tuple(
                rng.choice([None] + list(range(i))) for i in range(n)
            )
            _, ids = build_forest_store(parents, kp, store)
            states = enumerate_log_states(store, kp.author, ids)
            masks = _order_masks(
                len(states), lambda i, j: leq_fn(store, states[i], states[j])
            )
            index = {(s.last, s.forks): i for i, s in enumerate(states)}
            spaces.append((kp.author, states, masks, index))

        def sample_frontier() -> Frontier:
            chosen = []
            for author, states, _, _ in spaces:
                pick = rng.randrange(len(states) + 1)
                if pick < len(states):
                    chosen.append(states[pick])
            chosen.sort(key=lambda l: l.author)
            return Frontier(tuple(chosen))

        def check_author_lub(u: Frontier, a: Frontier, b: Frontier) -> None:
            want_authors = sorted(set(a.authors()) | set(b.authors()))
            if list(u.authors()) != want_authors:
                violations.append(
                    LawViolation("frontier", "join-author-union", repr(want_authors))
                )
                return
            for author, states, masks, index in spaces:
                merged = u.get(author)
                if merged is None:
                    continue
                k = index.get((merged.last, merged.forks))
                if k is None:
                    violations.append(
                        LawViolation("frontier", "join-closure", logstate.render(merged))
                    )
                    continue
                upper = (1 << len(states)) - 1
                for side in (a.get(author), b.get(author)):
                    if side is not None:
                        upper &= masks[index[(side.last, side.forks)]]
                if not upper >> k & 1:
                    violations.append(
                        LawViolation("frontier", "join-upper-bound", logstate.render(merged))
                    )
                if upper & ~masks[k]:
                    violations.append(
                        LawViolation("frontier", "join-least", logstate.render(merged))
                    )

        world_pairs = max(1, pairs // worlds)
        for _ in range(world_pairs):
            f1, f2 = sample_frontier(), sample_frontier()
            u = frontierstate.join(store, f1, f2)
            report.frontier_pairs += 1
            if frontierstate.join(store, f2, f1) != u:
                violations.append(LawViolation("frontier", "join-commutative", ""))
            if frontierstate.join(store, f1, f1) != f1:
                violations.append(LawViolation("frontier", "join-idempotent", ""))
            if not frontierstate.check_logs(store, u.logs).valid:
                violations.append(LawViolation("frontier", "join-valid", ""))
            if not (frontierstate.leq(store, f1, u) and frontierstate.leq(store, f2, u)):
                violations.append(LawViolation("frontier", "join-upper-bound", "leq"))
            check_author_lub(u, f1, f2)
            if not frontierstate.leq(store, f1, f1):
                violations.append(LawViolation("frontier", "reflexive", ""))
            if frontierstate.leq(store, f1, f2) and frontierstate.leq(store, f2, f1):
                if _frontier_class(f1) != _frontier_class(f2):
                    violations.append(LawViolation("frontier", "antisymmetric", ""))
            # update with one sampled state is monotone and validity-preserving
            for author, states, _, _ in spaces:
                candidate = states[rng.randrange(len(states))]
                outcome = frontierstate.update(store, f1, candidate)
                if not outcome.accepted:
                    violations.append(LawViolation("frontier", "update-accept-valid", ""))
                elif not frontierstate.leq(store, f1, outcome.frontier):
                    violations.append(LawViolation("frontier", "update-monotone", ""))
                elif not frontierstate.check_logs(store, outcome.frontier.logs).valid:
                    violations.append(LawViolation("frontier", "update-valid", ""))
                break

        world_triples = max(1, triples // worlds)
        for _ in range(world_triples):
            f1, f2, f3 = sample_frontier(), sample_frontier(), sample_frontier()
            report.frontier_triples += 1
            left = frontierstate.join(store, frontierstate.join(store, f1, f2), f3)
            right = frontierstate.join(store, f1, frontierstate.join(store, f2, f3))
            if _frontier_class(left) != _frontier_class(right):
                violations.append(LawViolation("frontier", "join-associative", ""))
            if frontierstate.leq(store, f1, f2) and frontierstate.leq(store, f2, f3):
                if not frontierstate.leq(store, f1, f3):
                    violations.append(LawViolation("frontier", "transitive", ""))


# -- entry point ------------------------------------------------------------------


def run_checks(
    max_msgs: int = 6,
    max_authors: int = 3,
    *,
    seed: int = 1,
    frontier_pairs: int = 2000,
    frontier_triples: int = 400,
    random_graphs: int = 6,
    random_graph_msgs: int = 10,
    leq_l_fn: LeqFn | None = None,
    join_l_fn: JoinFn | None = None,
) -> LatticeReport:
    """Run every law check at the given bounds and return the findings."""
    leq_fn = leq_l_fn if leq_l_fn is not None else logstate.leq
    join_fn = join_l_fn if join_l_fn is not None else logstate.join
    report = LatticeReport(max_msgs=max_msgs, max_authors=max_authors)

    keypair = KeyPair.from_name("lattice-chain-author")
    for parents in enumerate_forests(max_msgs):
        store, ids = build_forest_store(parents, keypair)
        report.stores += 1
        _check_log_section(store, keypair.author, ids, leq_fn, join_fn, report)
        _check_message_orders(store, ids, "forest", report)

    rng = random.Random(seed)
    for g in range(random_graphs):
        store, ids = random_store(
            rng, random_graph_msgs, max(2, min(max_authors, 3)), label=f"lattice-g{g}"
        )
        _check_message_orders(store, ids, "graph", report)

    if max_authors >= 1:
        _check_frontier_section(
            max_authors,
            min(max_msgs, 5) if max_msgs else 0,
            frontier_pairs,
            frontier_triples,
            seed,
            leq_fn,
            report,
        )
    return report
