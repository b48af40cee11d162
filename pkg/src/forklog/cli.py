"""Command-line harness: run scenarios, regenerate vectors, check laws.

Exit codes: 0 on success, 1 when an assertion or law check fails, 2 on
configuration or parse errors. All outputs go to explicitly named paths.
"""
from __future__ import annotations

import argparse
import sys

from . import lattice
from .crypto import KeyPair, vector_line
from .messages import (
    Message,
    MessageStore,
    StoreFormatError,
    StoreValidationError,
    make_message,
    msg_id,
)
from .sim import ScenarioError, load_scenario, run

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def golden_vector_messages() -> list[Message]:
    """The fixed message set behind the committed golden-vector file."""
    alpha = KeyPair.from_name("vector-alpha")
    beta = KeyPair.from_name("vector-beta")
    gamma = KeyPair.from_name("vector-gamma")
    a1 = make_message(alpha, None, frozenset(), b"")
    a2 = make_message(alpha, msg_id(a1), frozenset(), b"spend 5")
    b1 = make_message(beta, None, frozenset({msg_id(a1)}), b"ack a1")
    a2_fork = make_message(alpha, msg_id(a1), frozenset({msg_id(b1)}), b"spend 7")
    c1 = make_message(gamma, None, frozenset({msg_id(a2), msg_id(b1)}), b"observe")
    return [a1, a2, b1, a2_fork, c1]


def golden_vector_text() -> str:
    lines = [
        vector_line(m.author, m.prev, m.deps, m.payload, m.signature)
        for m in golden_vector_messages()
    ]
    return "\n".join(lines) + "\n"


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run(scenario, args.seed)
    try:
        report.write(args.out)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(
        f"{report.scenario} seed={report.seed}: "
        f"converged={report.converged} "
        f"rounds_to_convergence={report.rounds_to_convergence} "
        f"passed={report.passed}"
    )
    for name, held in sorted(report.assertions.items()):
        print(f"  {name}: {'ok' if held else 'FAILED'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_vectors(args: argparse.Namespace) -> int:
    try:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(golden_vector_text())
    except OSError as exc:
        print(f"cannot write vectors: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {len(golden_vector_messages())} vectors to {args.out}")
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace) -> int:
    if args.max_msgs < 0 or args.max_msgs > 10 or not 1 <= args.max_authors <= 3:
        print("bounds: 0 <= max-msgs <= 10, 1 <= max-authors <= 3", file=sys.stderr)
        return EXIT_CONFIG
    report = lattice.run_checks(args.max_msgs, args.max_authors, seed=args.seed)
    print(report.summary())
    for violation in report.violations[:50]:
        print(f"  {violation.section}/{violation.law}: {violation.detail}")
    return EXIT_OK if report.ok else EXIT_FAIL


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        store = MessageStore.load(args.store)
    except StoreFormatError as exc:
        print(f"store parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StoreValidationError as exc:
        print(f"invalid store: record {exc.index} violates {exc.reason}")
        return EXIT_FAIL
    except OSError as exc:
        print(f"cannot read store: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"store valid: {len(store)} messages")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forklog",
        description="Fork-detecting append-only log toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and write its report")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_vec = sub.add_parser("vectors", help="regenerate the golden vector file")
    p_vec.add_argument("--out", required=True)
    p_vec.set_defaults(func=_cmd_vectors)

    p_orc = sub.add_parser("oracle", help="run exhaustive lattice law checks")
    p_orc.add_argument("--max-msgs", type=int, default=6)
    p_orc.add_argument("--max-authors", type=int, default=3)
    p_orc.add_argument("--seed", type=int, default=1)
    p_orc.set_defaults(func=_cmd_oracle)

    p_val = sub.add_parser("validate", help="replay and validate a store file")
    p_val.add_argument("--store", required=True)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
