"""Experiment runner, event replay and statistics."""

from .events import EventSummary, verify_trace_events
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    OptReference,
    SweepResult,
    aggregate,
    resolve_opt,
    run_experiment,
    sweep,
)

__all__ = [
    "EventSummary",
    "verify_trace_events",
    "ExperimentConfig",
    "ExperimentReport",
    "OptReference",
    "SweepResult",
    "aggregate",
    "resolve_opt",
    "run_experiment",
    "sweep",
]
