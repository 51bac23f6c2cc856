"""Interleaved coalition formation, scheduling, and motion planning for
heterogeneous robot teams, with targeted repair under dynamic events."""

from .domain import (
    Allocation,
    DesiredTraitMatrix,
    ProblemDomain,
    TaskNetwork,
    TaskSpec,
    TeamTraitMatrix,
    WorldModel,
    aggregate_traits,
    is_valid_allocation,
    resource_count,
    trait_mismatch,
    validate_problem,
)
from .repair import DynamicEvent, EventKind, apply_event
from .repair import repair as repair_solution
from .search import SearchResult, Solution
from .search import search as solve

__all__ = [
    "Allocation",
    "DesiredTraitMatrix",
    "DynamicEvent",
    "EventKind",
    "ProblemDomain",
    "SearchResult",
    "Solution",
    "TaskNetwork",
    "TaskSpec",
    "TeamTraitMatrix",
    "WorldModel",
    "aggregate_traits",
    "apply_event",
    "is_valid_allocation",
    "repair_solution",
    "resource_count",
    "solve",
    "trait_mismatch",
    "validate_problem",
]
