"""Deterministic anti-entropy simulation of replicas, authors, and adversaries."""
from .engine import (
    ATTRIBUTABLE_REASONS,
    AuthorActor,
    Replica,
    Simulation,
    run,
    sync,
    window_probe,
)
from .report import SimReport
from .scenario import (
    AuthorSpec,
    ReplicaSpec,
    Scenario,
    ScenarioError,
    load_scenario,
    make_liveness_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)

__all__ = [
    "ATTRIBUTABLE_REASONS",
    "AuthorActor",
    "AuthorSpec",
    "Replica",
    "ReplicaSpec",
    "Scenario",
    "ScenarioError",
    "SimReport",
    "Simulation",
    "load_scenario",
    "make_liveness_scenario",
    "run",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "sync",
    "validate_scenario",
    "window_probe",
]
