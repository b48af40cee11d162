from __future__ import annotations

import pytest

from forklog import KeyPair, MessageStore, make_message


@pytest.fixture(scope="session")
def keys() -> dict[str, KeyPair]:
    return {name: KeyPair.from_name(f"test-{name}") for name in ("A", "B", "C")}


class StoreBuilder:
    """Insert helper that tracks ids by short name."""

    def __init__(self, store: MessageStore):
        self.store = store
        self.ids: dict[str, bytes] = {}

    def put(self, name, keypair, prev=None, deps=(), payload=None):
        prev_id = self.ids[prev] if isinstance(prev, str) else prev
        dep_ids = frozenset(self.ids[d] if isinstance(d, str) else d for d in deps)
        message = make_message(
            keypair, prev_id, dep_ids, payload if payload is not None else name.encode()
        )
        result = self.store.insert(message)
        assert result.accepted, f"{name}: {result.reason}"
        self.ids[name] = result.msg_id
        return result.msg_id


@pytest.fixture()
def fork_fixture(keys):
    """A's chain a1 -> a2 -> a3 with sibling a2p of a2, plus B's b1 depending on a1."""
    builder = StoreBuilder(MessageStore())
    builder.put("a1", keys["A"])
    builder.put("a2", keys["A"], prev="a1")
    builder.put("a3", keys["A"], prev="a2")
    builder.put("a2p", keys["A"], prev="a1", payload=b"a2-prime")
    builder.put("b1", keys["B"], deps=("a1",))
    return builder.store, builder.ids
