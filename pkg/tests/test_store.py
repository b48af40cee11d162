from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from forklog import (
    MISSING_DEPENDENCY,
    InsertStatus,
    Message,
    MessageStore,
    StoreFormatError,
    StoreValidationError,
    make_message,
    msg_id,
)
from forklog.lattice import random_store
from forklog.messages import STORE_MAGIC, encode_message


# -- insertion and validation -------------------------------------------------


def test_dependencies_must_arrive_first(keys):
    store = MessageStore()
    a1 = make_message(keys["A"], None, frozenset(), b"a1")
    a2 = make_message(keys["A"], msg_id(a1), frozenset(), b"a2")
    early = store.insert(a2)
    assert early.rejected and early.reason == MISSING_DEPENDENCY
    assert store.insert(a1).accepted
    assert store.insert(a2).accepted


def test_insert_is_idempotent(keys):
    store = MessageStore()
    m = make_message(keys["A"], None, frozenset(), b"a1")
    assert store.insert(m).accepted
    again = store.insert(m)
    assert again.status is InsertStatus.ALREADY_PRESENT
    assert len(store) == 1


def test_prev_from_other_author_rejected_m2(keys, fork_fixture):
    store, ids = fork_fixture
    bad = make_message(keys["A"], ids["b1"], frozenset(), b"chain-steal")
    result = store.insert(bad)
    assert result.rejected and result.reason == "M2"


def test_self_dependency_rejected_m3(keys, fork_fixture):
    store, ids = fork_fixture
    bad = make_message(keys["A"], ids["a3"], frozenset({ids["a1"]}), b"self-dep")
    result = store.insert(bad)
    assert result.rejected and result.reason == "M3"


def test_two_deps_from_one_author_rejected_m4(keys, fork_fixture):
    store, ids = fork_fixture
    bad = make_message(keys["C"], None, frozenset({ids["a1"], ids["a2"]}), b"double")
    result = store.insert(bad)
    assert result.rejected and result.reason == "M4"


def test_tampered_message_rejected_m5(keys, fork_fixture):
    store, ids = fork_fixture
    genuine = make_message(keys["A"], ids["a3"], frozenset(), b"real")
    forged = Message(genuine.author, genuine.prev, genuine.deps, b"fake", genuine.signature)
    result = store.insert(forged)
    assert result.rejected and result.reason == "M5"


def test_malformed_prev_rejected_m1(keys):
    store = MessageStore()
    bad = make_message(keys["A"], b"short", frozenset(), b"x")
    result = store.insert(bad)
    assert result.rejected and result.reason == "M1"


def test_malformed_dep_rejected_m3(keys):
    store = MessageStore()
    bad = make_message(keys["A"], None, frozenset({b"tiny"}), b"x")
    result = store.insert(bad)
    assert result.rejected and result.reason == "M3"


def test_rejection_leaves_store_unchanged(keys, fork_fixture):
    store, ids = fork_fixture
    size = len(store)
    bad = make_message(keys["C"], None, frozenset({ids["a1"], ids["a2"]}), b"double")
    assert store.insert(bad).rejected
    assert len(store) == size and msg_id(bad) not in store


def test_strict_mode_rejects_dependency_regression(keys):
    store = MessageStore(strict_deps=True)
    b1 = make_message(keys["B"], None, frozenset(), b"b1")
    store.insert(b1)
    b2 = make_message(keys["B"], msg_id(b1), frozenset(), b"b2")
    store.insert(b2)
    a1 = make_message(keys["A"], None, frozenset({msg_id(b2)}), b"a1")
    assert store.insert(a1).accepted
    a2 = make_message(keys["A"], msg_id(a1), frozenset({msg_id(b1)}), b"a2: dep moved back")
    result = store.insert(a2)
    assert result.rejected and result.reason == "M7"
    # the default store accepts the same sequence
    loose = MessageStore()
    for m in (b1, b2, a1, a2):
        assert loose.insert(m).accepted


def test_strict_mode_allows_equal_or_newer_deps(keys):
    store = MessageStore(strict_deps=True)
    b1 = make_message(keys["B"], None, frozenset(), b"b1")
    store.insert(b1)
    b2 = make_message(keys["B"], msg_id(b1), frozenset(), b"b2")
    store.insert(b2)
    a1 = make_message(keys["A"], None, frozenset({msg_id(b1)}), b"a1")
    assert store.insert(a1).accepted
    a2 = make_message(keys["A"], msg_id(a1), frozenset({msg_id(b1)}), b"a2 same dep")
    assert store.insert(a2).accepted
    a3 = make_message(keys["A"], msg_id(a2), frozenset({msg_id(b2)}), b"a3 newer dep")
    assert store.insert(a3).accepted


# -- relations against the brute-force oracles ---------------------------------


def test_happens_before_matches_oracle(fork_fixture):
    store, ids = fork_fixture
    graph = oracles.graph_of(store)
    assert store.happens_before(ids["a1"], ids["a3"]) is True
    assert store.happens_before(ids["a3"], ids["a1"]) is False
    assert store.happens_before(None, ids["b1"]) is True
    for x in ids.values():
        for y in ids.values():
            assert store.happens_before(x, y) == oracles.reaches(graph, x, y)


def test_partial_order_queries_match_oracle(fork_fixture):
    store, ids = fork_fixture
    graph = oracles.graph_of(store)
    assert store.leq(ids["a2"], ids["a2"])
    assert store.concurrent(ids["a2"], ids["a2p"])
    assert not store.concurrent(ids["a1"], ids["b1"])
    for x in ids.values():
        for y in ids.values():
            assert store.leq(x, y) == oracles.leq_m(graph, x, y)
            assert store.concurrent(x, y) == oracles.concurrent_m(graph, x, y)


def test_causal_history_matches_oracle(fork_fixture):
    store, ids = fork_fixture
    graph = oracles.graph_of(store)
    assert store.causal_history(ids["a1"]) == {ids["a1"]}
    assert store.causal_history(ids["b1"]) == {ids["b1"], ids["a1"]}
    assert store.causal_history(None) == frozenset()
    for x in ids.values():
        assert store.causal_history(x) == oracles.history(graph, x)


def test_chain_relations_match_oracle(fork_fixture):
    store, ids = fork_fixture
    graph = oracles.graph_of(store)
    assert store.leq_log(ids["a1"], ids["a3"])
    assert not store.leq_log(ids["a1"], ids["b1"])  # deps do not count
    assert store.leq_log(None, ids["a1"])
    assert store.log_history(ids["a3"]) == {ids["a1"], ids["a2"], ids["a3"]}
    for x in ids.values():
        for y in ids.values():
            assert store.leq_log(x, y) == oracles.leq_log(graph, x, y)


def test_log_range_examples(fork_fixture):
    store, ids = fork_fixture
    assert store.log_range(ids["a1"], ids["a3"]) == {ids["a2"], ids["a3"]}
    assert store.log_range(ids["a3"], ids["a3"]) == frozenset()
    assert store.log_range(None, ids["a2"]) == {ids["a1"], ids["a2"]}


def test_log_prefix_examples(keys, fork_fixture):
    store, ids = fork_fixture
    assert store.log_prefix(ids["a2"], ids["a3"]) == ids["a2"]
    assert store.log_prefix(ids["a2"], ids["a2p"]) == ids["a1"]
    r1 = make_message(keys["C"], None, frozenset(), b"root one")
    r2 = make_message(keys["C"], None, frozenset(), b"root two")
    store.insert(r1), store.insert(r2)
    assert store.log_prefix(msg_id(r1), msg_id(r2)) is None
    assert store.log_prefix(None, ids["a1"]) is None


def test_log_prefix_requires_one_author(fork_fixture):
    store, ids = fork_fixture
    with pytest.raises(ValueError):
        store.log_prefix(ids["a1"], ids["b1"])


def test_fork_proof_examples(fork_fixture):
    store, ids = fork_fixture
    assert store.fork_proof(ids["a2"], ids["a2p"]) == {ids["a2"], ids["a2p"]}
    assert store.fork_proof(ids["a2"], ids["a3"]) == {ids["a3"]}
    assert store.fork_proof(ids["a3"], ids["a3"]) == frozenset()


def test_unknown_digest_is_an_error(fork_fixture):
    store, ids = fork_fixture
    with pytest.raises(KeyError):
        store.happens_before(bytes(32), bytes(32))
    with pytest.raises(KeyError):
        store.happens_before(bytes(32), ids["a1"])
    with pytest.raises(KeyError):
        store.causal_history(bytes(32))
    with pytest.raises(KeyError):
        store.leq(ids["a1"], bytes(32))
    with pytest.raises(KeyError):
        store.leq_log(bytes(32), ids["a1"])


def test_fork_proof_invariants_on_concurrent_pairs():
    rng = random.Random(99)
    for g in range(40):
        store, ids = random_store(rng, 10, 2, label=f"fp-{g}")
        for x in ids:
            for y in ids:
                mx, my = store.get(x), store.get(y)
                if mx.author != my.author:
                    continue
                prefix = store.log_prefix(x, y)
                proof = store.fork_proof(x, y)
                members = store.log_range(prefix, x) | store.log_range(prefix, y)
                assert proof <= members
                assert all(store.get(d).prev == prefix for d in proof)
                if store.concurrent_log(x, y):
                    assert len(proof) >= 2
                    assert any(store.leq_log(d, x) for d in proof)
                    assert any(store.leq_log(d, y) for d in proof)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_random_stores_stay_closed_and_acyclic(seed):
    store, ids = random_store(random.Random(seed), n_msgs=12, n_authors=3, label=f"cl-{seed}")
    for digest, m in store.items():
        for ref in ([m.prev] if m.prev is not None else []) + sorted(m.deps):
            assert ref in store
        assert not store.happens_before(digest, digest)


# -- persistence -----------------------------------------------------------------


def test_save_load_roundtrip_is_identical(tmp_path, fork_fixture):
    store, ids = fork_fixture
    path = tmp_path / "fixture.store"
    store.save(path)
    reloaded = MessageStore.load(path)
    assert [d for d, _ in reloaded.items()] == [d for d, _ in store.items()]
    for digest, m in store.items():
        assert msg_id(reloaded.get(digest)) == digest


def test_load_reports_first_violated_property(tmp_path, keys, fork_fixture):
    store, ids = fork_fixture
    path = tmp_path / "bad.store"
    store.save(path)
    offender = make_message(keys["C"], None, frozenset({ids["a1"], ids["a2"]}), b"m4")
    record = encode_message(offender)
    with open(path, "ab") as fh:
        fh.write(len(record).to_bytes(4, "big"))
        fh.write(record)
    with pytest.raises(StoreValidationError) as err:
        MessageStore.load(path)
    assert err.value.reason == "M4"


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "garbage.store"
    path.write_bytes(b"NOTASTORE")
    with pytest.raises(StoreFormatError):
        MessageStore.load(path)


def test_load_rejects_truncated_record(tmp_path, fork_fixture):
    store, _ = fork_fixture
    path = tmp_path / "trunc.store"
    store.save(path)
    data = path.read_bytes()
    path.write_bytes(data[:-3])
    with pytest.raises(StoreFormatError):
        MessageStore.load(path)
