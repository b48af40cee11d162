"""Run reports with a canonical JSON form.

Reports contain only counts, hex digests, and flags derived from the run,
never wall-clock values or paths, so identical (scenario, seed) inputs
produce byte-identical report files.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SimReport:
    scenario: str
    seed: int
    publish_rounds: int
    total_rounds: int
    converged: bool
    rounds_to_convergence: int | None
    authors: dict[str, dict]
    fork_detections: list[dict]
    misbehavior: dict[str, dict[str, str]]
    sync_stats: dict[str, int]
    assertions: dict[str, bool]
    final_frontier: list[str]

    @property
    def passed(self) -> bool:
        return self.converged and all(self.assertions.values())

    def to_dict(self) -> dict:
        data = asdict(self)
        data["passed"] = self.passed
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_json())
