"""Scenario files: replicas, sync graph, authors, and publish plans.

A scenario plus a seed fully determines a run. Replica behaviors are
``correct``, ``omit`` (Byzantine, never sends), and ``partial`` (Byzantine,
forwards only part of its state). Author behaviors are ``correct`` and
``forking``; a forking author carries a fork plan of (branch-point index,
branch count) pairs that fire in order once its chain is long enough.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Any

REPLICA_BEHAVIORS = ("correct", "omit", "partial")
AUTHOR_BEHAVIORS = ("correct", "forking")


class ScenarioError(ValueError):
    """Configuration or parse problem; maps to CLI exit code 2."""


@dataclass(frozen=True)
class ReplicaSpec:
    id: int
    behavior: str = "correct"


@dataclass(frozen=True)
class AuthorSpec:
    name: str
    behavior: str = "correct"
    home: tuple[int, ...] = ()
    fork_plan: tuple[tuple[int, int], ...] = ()
    deps: str = "latest"  # "latest" or "none"
    extend_branches: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    replicas: tuple[ReplicaSpec, ...]
    sync_graph: tuple[tuple[int, int], ...]
    authors: tuple[AuthorSpec, ...]
    rounds: int
    publishes_per_round: int = 1
    seed: int = 1
    strict_deps: bool = False

    def correct_replica_ids(self) -> tuple[int, ...]:
        return tuple(r.id for r in self.replicas if r.behavior == "correct")


_SCENARIO_KEYS = {
    "name",
    "replicas",
    "sync_graph",
    "authors",
    "rounds",
    "publishes_per_round",
    "seed",
    "strict_deps",
}
_REPLICA_KEYS = {"id", "behavior"}
_AUTHOR_KEYS = {"name", "behavior", "home", "fork_plan", "deps", "extend_branches"}


def scenario_from_dict(raw: dict[str, Any]) -> Scenario:
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        replicas = tuple(
            ReplicaSpec(**_checked(r, _REPLICA_KEYS, "replica")) for r in raw["replicas"]
        )
        authors = tuple(_author_from_dict(a) for a in raw["authors"])
        scenario = Scenario(
            name=str(raw.get("name", "scenario")),
            replicas=replicas,
            sync_graph=tuple(tuple(edge) for edge in raw["sync_graph"]),
            authors=authors,
            rounds=int(raw["rounds"]),
            publishes_per_round=int(raw.get("publishes_per_round", 1)),
            seed=int(raw.get("seed", 1)),
            strict_deps=bool(raw.get("strict_deps", False)),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def _checked(raw: dict[str, Any], allowed: set[str], what: str) -> dict[str, Any]:
    unknown = set(raw) - allowed
    if unknown:
        raise ScenarioError(f"unknown {what} keys: {sorted(unknown)}")
    return raw


def _author_from_dict(raw: dict[str, Any]) -> AuthorSpec:
    raw = _checked(raw, _AUTHOR_KEYS, "author")
    behavior = raw.get("behavior", "correct")
    return AuthorSpec(
        name=str(raw["name"]),
        behavior=behavior,
        home=tuple(raw.get("home", ())),
        fork_plan=tuple(tuple(entry) for entry in raw.get("fork_plan", ())),
        deps=raw.get("deps", "none" if behavior == "forking" else "latest"),
        extend_branches=bool(raw.get("extend_branches", False)),
    )


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    """JSON-ready form accepted back by scenario_from_dict."""
    return {
        "name": s.name,
        "replicas": [{"id": r.id, "behavior": r.behavior} for r in s.replicas],
        "sync_graph": [list(edge) for edge in s.sync_graph],
        "authors": [
            {
                "name": a.name,
                "behavior": a.behavior,
                "home": list(a.home),
                "fork_plan": [list(entry) for entry in a.fork_plan],
                "deps": a.deps,
                "extend_branches": a.extend_branches,
            }
            for a in s.authors
        ],
        "rounds": s.rounds,
        "publishes_per_round": s.publishes_per_round,
        "seed": s.seed,
        "strict_deps": s.strict_deps,
    }


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must hold a JSON object")
    return scenario_from_dict(raw)


def validate_scenario(s: Scenario) -> None:
    ids = [r.id for r in s.replicas]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate replica ids")
    for r in s.replicas:
        if r.behavior not in REPLICA_BEHAVIORS:
            raise ScenarioError(f"unknown replica behavior {r.behavior!r}")
    correct = s.correct_replica_ids()
    if len(correct) < 2:
        raise ScenarioError("need at least two correct replicas")
    id_set = set(ids)
    for edge in s.sync_graph:
        if len(edge) != 2 or edge[0] == edge[1]:
            raise ScenarioError(f"bad sync edge {edge!r}")
        if edge[0] not in id_set or edge[1] not in id_set:
            raise ScenarioError(f"sync edge {edge!r} references unknown replica")
    if not _connected(correct, s.sync_graph):
        raise ScenarioError("correct replicas do not form a connected sync graph")
    names = [a.name for a in s.authors]
    if len(set(names)) != len(names):
        raise ScenarioError("duplicate author names")
    for a in s.authors:
        if a.behavior not in AUTHOR_BEHAVIORS:
            raise ScenarioError(f"unknown author behavior {a.behavior!r}")
        if a.deps not in ("latest", "none"):
            raise ScenarioError(f"unknown deps policy {a.deps!r}")
        if not a.home:
            raise ScenarioError(f"author {a.name} has no home replica")
        if any(h not in id_set for h in a.home):
            raise ScenarioError(f"author {a.name} homes unknown replica")
        if a.behavior == "forking":
            if not a.fork_plan:
                raise ScenarioError(f"forking author {a.name} needs a fork_plan")
            first = True
            for entry in a.fork_plan:
                if len(entry) != 2 or entry[0] < 0 or entry[1] < 1:
                    raise ScenarioError(f"bad fork_plan entry {entry!r}")
                if first and entry[1] < 2:
                    raise ScenarioError("first fork_plan entry needs at least 2 branches")
                first = False
        elif a.fork_plan:
            raise ScenarioError(f"correct author {a.name} cannot carry a fork_plan")
    if s.rounds < 0 or s.publishes_per_round < 1:
        raise ScenarioError("rounds must be >= 0 and publishes_per_round >= 1")


def make_liveness_scenario(
    seed: int,
    *,
    extend_branches: bool = False,
    deep_reveal: bool = False,
    name: str | None = None,
) -> Scenario:
    """Five correct replicas on a random connected graph, one omitting
    Byzantine replica, one correct author, and one forking author that
    splits its chain after message three.

    With ``extend_branches`` the forking author keeps publishing on both
    branches after the split; with ``deep_reveal`` it later signs a second
    fork right after its first message.
    """
    rng = random.Random(
        int.from_bytes(hashlib.sha256(f"scenario:{seed}".encode()).digest(), "big")
    )
    correct = list(range(5))
    edges: set[tuple[int, int]] = set()
    order = correct[:]
    rng.shuffle(order)
    for i in range(1, len(order)):
        a, b = order[i], order[rng.randrange(i)]
        edges.add((min(a, b), max(a, b)))
    for a in range(5):
        for b in range(a + 1, 5):
            if rng.random() < 0.3:
                edges.add((a, b))
    for b in rng.sample(correct, 2):
        edges.add((b, 5))
    fork_plan = [[3, 2]] + ([[1, 2]] if deep_reveal else [])
    rounds = 10 if extend_branches else (7 if deep_reveal else 6)
    suffix = "-extend" if extend_branches else ("-deep" if deep_reveal else "")
    return scenario_from_dict(
        {
            "name": name or f"liveness{suffix}-{seed}",
            "replicas": [{"id": i} for i in correct] + [{"id": 5, "behavior": "omit"}],
            "sync_graph": sorted(edges),
            "authors": [
                {"name": "alice", "home": [rng.choice(correct)]},
                {
                    "name": "mallory",
                    "behavior": "forking",
                    "home": rng.sample(correct, 2),
                    "fork_plan": fork_plan,
                    "extend_branches": extend_branches,
                },
            ],
            "rounds": rounds,
            "seed": seed,
        }
    )


def _connected(nodes: tuple[int, ...], edges: tuple[tuple[int, int], ...]) -> bool:
    if len(nodes) <= 1:
        return True
    node_set = set(nodes)
    adjacency: dict[int, set[int]] = {n: set() for n in nodes}
    for a, b in edges:
        if a in node_set and b in node_set:
            adjacency[a].add(b)
            adjacency[b].add(a)
    seen = {nodes[0]}
    frontier = [nodes[0]]
    while frontier:
        cur = frontier.pop()
        for nxt in adjacency[cur]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen == node_set
