"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``. Every check is exact;
the heavyweight enumerations are shared through session fixtures so the
whole module stays well inside its time budgets.
"""
from __future__ import annotations

import random

import pytest

import oracles
from forklog import Message, MessageStore, frontier, lattice, log, make_message, msg_id
from forklog.cli import golden_vector_messages, golden_vector_text
from forklog.crypto import KeyPair
from forklog.sim import Replica, make_liveness_scenario, run, sync, window_probe

GOLDEN_VECTOR_FILE = "tests/data/golden_vectors.txt"

LAW_SECTIONS = {
    "semilattice": {
        "join-commutative",
        "join-associative",
        "join-idempotent",
        "join-upper-bound",
        "join-least",
        "join-closure",
        "join-author-union",
    },
    "order": {"reflexive", "transitive", "antisymmetric"},
    "monotone": {"append-monotone", "update-monotone"},
    "validity": {
        "enumerated-state-valid",
        "join-valid",
        "append-valid",
        "update-valid",
        "update-accept-valid",
        "phase-trapdoor",
        "shrink-direction",
    },
}


@pytest.fixture(scope="session")
def law_report():
    return lattice.run_checks(6, 3, frontier_pairs=10_000, frontier_triples=2_000, seed=1)


def _laws(report, group):
    return [v for v in report.violations if v.law in LAW_SECTIONS[group]]


def test_c01_semilattice_laws(law_report):
    """Join is commutative, associative (modulo the fork-set quotient),
    idempotent, and the least upper bound, exhaustively for log states over
    every forest shape with up to six messages and for ten thousand sampled
    frontier pairs."""
    assert law_report.stores == 85 and law_report.frontier_pairs >= 10_000
    bad = _laws(law_report, "semilattice")
    assert not bad, bad[:5]
    print("criterion 1 (semilattice suite): PASS")


def test_c02_partial_order_laws(law_report):
    bad = _laws(law_report, "order")
    assert not bad, bad[:5]
    print("criterion 2 (partial-order suite): PASS")


def test_c03_monotonicity(law_report):
    bad = _laws(law_report, "monotone")
    assert not bad, bad[:5]
    print("criterion 3 (monotonicity suite): PASS")


def test_c04_validity_preservation_and_rejection_labels(law_report, keys, fork_fixture):
    bad = _laws(law_report, "validity")
    assert not bad, bad[:5]

    store, ids = fork_fixture
    author = keys["A"].author
    cases = {
        "CL2": log.Log(author, bytes(32), frozenset()),
        "CL3": log.Log(author, ids["b1"], frozenset()),
        "FL4": log.Log(author, ids["a1"], frozenset({ids["a2"], bytes(32)})),
        "FL5": log.Log(author, None, frozenset({ids["a1"], ids["b1"]})),
        "FL6": log.Log(author, ids["a1"], frozenset({ids["a2"]})),
        "FL7": log.Log(author, ids["a2"], frozenset({ids["a2p"], ids["a3"]})),
    }
    for label, state in cases.items():
        report = log.validate(store, state)
        assert not report.valid and label in report.violated, label
        outcome = frontier.update(store, frontier.initialize(), state)
        assert not outcome.accepted and label in outcome.report.violated, label

    dup = [log.Log(author, ids["a1"], frozenset()), log.Log(author, ids["a2"], frozenset())]
    assert frontier.check_logs(store, dup).violated == ("F2",)
    assert frontier.check_logs(store, [cases["CL2"]]).violated == ("F1",)
    print("criterion 4 (validity preservation): PASS")


def test_c05_graph_query_oracle_equivalence():
    """log_prefix equals the brute-force greatest lower bound and fork_proof
    equals the literal range filter, exhaustively over every message pair of
    every forest shape with up to six messages plus 150 randomized
    multi-author stores with up to ten messages."""
    keypair = KeyPair.from_name("lattice-chain-author")
    stores = []
    for parents in lattice.enumerate_forests(6):
        stores.append(lattice.build_forest_store(parents, keypair))
    rng = random.Random(505)
    for g in range(150):
        stores.append(lattice.random_store(rng, 10, 3, label=f"c05-{g}"))

    pairs = 0
    for store, ids in stores:
        graph = oracles.graph_of(store)
        elements = [None] + list(ids)
        for x in elements:
            assert store.causal_history(x) == oracles.history(graph, x)
            assert store.log_history(x) == oracles.log_history(graph, x)
            for y in elements:
                pairs += 1
                assert store.leq(x, y) == oracles.leq_m(graph, x, y)
                assert store.leq_log(x, y) == oracles.leq_log(graph, x, y)
                if y is not None:
                    assert store.happens_before(x, y) == oracles.reaches(graph, x, y)
                same_author = (
                    x is None
                    or y is None
                    or graph[x].author == graph[y].author
                )
                if same_author:
                    assert store.log_prefix(x, y) == oracles.log_prefix(graph, x, y)
                    assert store.fork_proof(x, y) == oracles.fork_proof(graph, x, y)
                    assert store.log_range(x, y) == oracles.log_range(graph, x, y)
    assert pairs > 10_000
    print(f"criterion 5 (graph query oracle equivalence, {pairs} pairs): PASS")


def test_c06_convergence_and_liveness_over_100_seeds():
    for seed in range(1, 101):
        report = run(make_liveness_scenario(seed))
        assert report.converged, seed
        assert all(report.assertions.values()), (seed, report.assertions)
        mallory = next(v for v in report.authors.values() if v["behavior"] == "forking")
        assert mallory["phase"] == "shrinking", seed
        assert mallory["last"] == mallory["chain"][2], seed
        assert sorted(mallory["forks"]) == sorted(mallory["branch_heads"]), seed
        alice = next(v for v in report.authors.values() if v["behavior"] == "correct")
        assert alice["phase"] == "growing" and alice["last"] == alice["chain"][-1], seed
    print("criterion 6 (convergence + liveness, 100 seeds): PASS")


def test_c07_fork_death_over_100_seeds():
    for seed in range(1, 101):
        probe = window_probe(make_liveness_scenario(seed, extend_branches=True))
        assert probe["converged"], seed
        for entry in probe["probes"].values():
            assert entry["full_propagation_round"] is not None, seed
            assert entry["post_propagation_growth"] is False, seed
    print("criterion 7 (fork death, 100 seeds): PASS")


def test_c08_deeper_fork_overrides():
    for seed in range(1, 26):
        report = run(make_liveness_scenario(seed, deep_reveal=True))
        assert report.converged and all(report.assertions.values()), seed
        mallory = next(v for v in report.authors.values() if v["behavior"] == "forking")
        assert mallory["phase"] == "shrinking", seed
        assert mallory["last"] == mallory["chain"][0], seed
    print("criterion 8 (deeper fork override, 25 seeds): PASS")


def test_c09_self_certification_vectors_and_mutations():
    with open(GOLDEN_VECTOR_FILE, "r", encoding="ascii") as fh:
        committed = fh.read()
    assert golden_vector_text() == committed

    store = MessageStore()
    originals = golden_vector_messages()
    for m in originals[:-1]:
        assert store.insert(m).accepted

    def flipped(data: bytes, position: int) -> bytes:
        index = position % len(data)
        return data[:index] + bytes([data[index] ^ 0x01]) + data[index + 1 :]

    target = originals[-1]
    mutants = []
    for position in (0, 7, 31):
        mutants.append(Message(flipped(target.author, position), target.prev, target.deps,
                               target.payload, target.signature))
        mutants.append(Message(target.author, target.prev, target.deps,
                               flipped(target.payload, position), target.signature))
        mutants.append(Message(target.author, target.prev, target.deps,
                               target.payload, flipped(target.signature, position)))
        some_dep = sorted(target.deps)[0]
        new_deps = frozenset({flipped(some_dep, position)} | (target.deps - {some_dep}))
        mutants.append(Message(target.author, target.prev, new_deps,
                               target.payload, target.signature))
    chained = originals[1]
    for position in (0, 31):
        mutants.append(Message(chained.author, flipped(chained.prev, position),
                               chained.deps, chained.payload, chained.signature))
    for mutant in mutants:
        result = store.insert(mutant)
        assert result.rejected and result.reason == "M5", result
    assert store.insert(target).accepted
    print("criterion 9 (self-certification vectors + mutations): PASS")


def test_c10_misbehavior_bound():
    cheat = KeyPair.from_name("acceptance-cheat")
    victim = KeyPair.from_name("acceptance-victim")
    v1 = make_message(victim, None, frozenset(), b"v1")
    v2 = make_message(victim, msg_id(v1), frozenset(), b"v2")
    replicas = [Replica(id=i) for i in range(3)]
    for replica in replicas:
        replica.receive_publish(v1)
        replica.receive_publish(v2)
    for i in range(100):
        spam = make_message(
            cheat, None, frozenset({msg_id(v1), msg_id(v2)}), f"spam {i}".encode()
        )
        result = replicas[0].ingest(spam)
        assert result.rejected and result.reason == "M4"
    sync(replicas[1], replicas[0])
    sync(replicas[2], replicas[1])
    for replica in replicas:
        assert list(replica.misbehavior) == [cheat.author]
    print("criterion 10 (misbehavior bound): PASS")
