"""Core problem model: trait matrices, task network, world, allocations.

All types are immutable after construction; a mutated problem is a new
``ProblemDomain`` with ``iteration + 1``. Cross-object consistency (matrix
dimensions, DAG-ness of precedence, geometric placement) is checked by
``validate_problem`` rather than in constructors so that malformed inputs
can be loaded and reported instead of crashing the loader.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Point, Shape, point_in_any

GE_TOL = 1e-9  # absolute slack for elementwise >= comparisons


class DomainError(Exception):
    """Base class for model errors."""


class DimensionMismatchError(DomainError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TeamTraitMatrix:
    """Per-robot capability values; rows are robots, columns are traits."""

    entries: np.ndarray
    robot_ids: tuple[str, ...]
    trait_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))
        object.__setattr__(self, "robot_ids", tuple(self.robot_ids))
        object.__setattr__(self, "trait_names", tuple(self.trait_names))
        if self.entries.ndim != 2:
            raise DimensionMismatchError("team trait matrix must be 2-D")
        n, u = self.entries.shape
        if n < 1 or u < 1:
            raise DimensionMismatchError("team trait matrix must be at least 1x1")
        if len(self.robot_ids) != n:
            raise DimensionMismatchError("robot_ids length must equal row count")
        if len(self.trait_names) != u:
            raise DimensionMismatchError("trait_names length must equal column count")
        if np.any(self.entries < 0):
            raise DomainError("trait values must be non-negative")

    @property
    def n_robots(self) -> int:
        return self.entries.shape[0]

    @property
    def n_traits(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class DesiredTraitMatrix:
    """Per-task trait requirements; rows are tasks, columns are traits."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))
        if self.entries.ndim != 2:
            raise DimensionMismatchError("desired trait matrix must be 2-D")
        if np.any(self.entries < 0):
            raise DomainError("required trait values must be non-negative")

    @property
    def n_tasks(self) -> int:
        return self.entries.shape[0]

    @property
    def n_traits(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class TaskSpec:
    id: str
    duration: float
    initial_config: Point
    terminal_config: Point

    def __post_init__(self):
        object.__setattr__(self, "initial_config", tuple(self.initial_config))
        object.__setattr__(self, "terminal_config", tuple(self.terminal_config))


@dataclass(frozen=True)
class TaskNetwork:
    """Tasks with precedence (ordered) and mutex (unordered) edges.

    Edges are index pairs into ``tasks``; mutex pairs are stored sorted.
    """

    tasks: tuple[TaskSpec, ...]
    precedence_edges: frozenset[tuple[int, int]]
    mutex_edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(
            self, "precedence_edges", frozenset(tuple(e) for e in self.precedence_edges)
        )
        object.__setattr__(
            self,
            "mutex_edges",
            frozenset(tuple(sorted(e)) for e in self.mutex_edges),
        )
        for i, j in self.precedence_edges | self.mutex_edges:
            if i == j:
                raise DomainError(f"self-loop on task index {i}")

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def task_index(self, task_id: str) -> int:
        for i, t in enumerate(self.tasks):
            if t.id == task_id:
                return i
        raise KeyError(f"unknown task id {task_id!r}")


@dataclass(frozen=True)
class WorldModel:
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    obstacles: tuple[Shape, ...]
    robot_start_configs: dict[str, Point]
    robot_speeds: dict[str, float]

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(
            self,
            "robot_start_configs",
            {k: tuple(v) for k, v in self.robot_start_configs.items()},
        )
        object.__setattr__(self, "robot_speeds", dict(self.robot_speeds))

    def in_bounds(self, p: Point) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax


@dataclass(frozen=True)
class ProblemDomain:
    iteration: int
    network: TaskNetwork
    team: TeamTraitMatrix
    requirements: DesiredTraitMatrix
    world: WorldModel

    @property
    def n_tasks(self) -> int:
        return self.network.n_tasks

    @property
    def n_robots(self) -> int:
        return self.team.n_robots


@dataclass(frozen=True)
class Allocation:
    """Binary robot-to-task assignment matrix, tasks x robots."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.int8)
        if arr.ndim != 2:
            raise DimensionMismatchError("allocation must be 2-D")
        if not np.isin(arr, (0, 1)).all():
            raise DomainError("allocation entries must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def key(self) -> bytes:
        """Canonical hashable form (shape is fixed per domain)."""
        return self.entries.tobytes()

    def with_assignment(self, task: int, robot: int) -> "Allocation":
        out = np.array(self.entries)
        out[task, robot] = 1
        return Allocation(out)


def aggregate_traits(alloc: Allocation, team: TeamTraitMatrix) -> np.ndarray:
    """Traits accumulated at each task by its assigned coalition (A @ Q)."""
    if alloc.entries.shape[1] != team.n_robots:
        raise DimensionMismatchError(
            f"allocation has {alloc.entries.shape[1]} robot columns, "
            f"team has {team.n_robots} robots"
        )
    return alloc.entries.astype(float) @ team.entries


def trait_mismatch(
    alloc: Allocation, team: TeamTraitMatrix, req: DesiredTraitMatrix
) -> np.ndarray:
    """Requirement minus aggregate; positive entries are unmet demand."""
    agg = aggregate_traits(alloc, team)
    if agg.shape != req.entries.shape:
        raise DimensionMismatchError(
            f"aggregate shape {agg.shape} vs requirements {req.entries.shape}"
        )
    return req.entries - agg


def is_valid_allocation(
    alloc: Allocation, team: TeamTraitMatrix, req: DesiredTraitMatrix
) -> bool:
    """True iff each task's coalition meets its requirement row."""
    return bool(np.all(trait_mismatch(alloc, team, req) <= GE_TOL))


def resource_count(alloc: Allocation) -> int:
    return int(alloc.entries.sum())


def precedence_has_cycle(network: TaskNetwork) -> bool:
    """Kahn's algorithm; True when some edge survives elimination."""
    n = network.n_tasks
    indeg = [0] * n
    succ: list[list[int]] = [[] for _ in range(n)]
    for i, j in network.precedence_edges:
        indeg[j] += 1
        succ[i].append(j)
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    return seen < n


@dataclass
class ValidationIssue:
    code: str
    message: str


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    def add(self, code: str, message: str) -> None:
        self.issues.append(ValidationIssue(code, message))

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}


def validate_problem(domain: ProblemDomain) -> ValidationReport:
    """Collect every well-formedness violation; empty report means valid."""
    report = ValidationReport()
    net, team, req, world = domain.network, domain.team, domain.requirements, domain.world

    if req.n_tasks != net.n_tasks:
        report.add(
            "DIMENSION_MISMATCH",
            f"requirements have {req.n_tasks} rows, network has {net.n_tasks} tasks",
        )
    if req.n_traits != team.n_traits:
        report.add(
            "DIMENSION_MISMATCH",
            f"requirements have {req.n_traits} trait columns, team has {team.n_traits}",
        )
    if precedence_has_cycle(net):
        report.add("CYCLIC_PRECEDENCE", "precedence edges contain a cycle")
    for i, t in enumerate(net.tasks):
        if t.duration < 0:
            report.add("NEGATIVE_DURATION", f"task {t.id} has duration {t.duration}")
    for i, j in net.precedence_edges | net.mutex_edges:
        if not (0 <= i < net.n_tasks and 0 <= j < net.n_tasks):
            report.add("BAD_EDGE_INDEX", f"edge ({i},{j}) out of range")
    for rid in team.robot_ids:
        start = world.robot_start_configs.get(rid)
        if start is None:
            report.add("MISSING_START", f"robot {rid} has no start config")
            continue
        if not world.in_bounds(start):
            report.add("START_OUT_OF_BOUNDS", f"robot {rid} starts outside bounds")
        if point_in_any(start, world.obstacles):
            report.add("START_IN_OBSTACLE", f"robot {rid} starts inside an obstacle")
        speed = world.robot_speeds.get(rid, 0.0)
        if speed is None or speed <= 0:
            report.add("BAD_SPEED", f"robot {rid} has non-positive speed")
    return report
