"""Greedy best-first search over the incremental allocation graph.

Nodes are allocation matrices; each edge adds one robot-task assignment.
Priority is a convex mix of two normalized scores: the unmet-requirement
fraction (apr) and the schedule quality relative to analytic makespan
bounds (nsq). Every schedule is solved against roadmap travel times; the
underlying plans are computed on demand and memoized in a shared cache, so
repeated trips cost one shortest-path query across the whole search and an
accepted solution's schedule is always backed by real plans.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import motion
from .domain import (
    Allocation,
    ProblemDomain,
    aggregate_traits,
    resource_count,
)
from .motion import MotionPlan, PlanCache, Roadmap
from .scheduler import (
    Schedule,
    SchedulingProblem,
    build_scheduling_problem,
    schedule_lower_bound,
    schedule_upper_bound,
    solve_schedule,
)

APR_TOL = 1e-12
MK_TOL = 1e-9

OPEN, CLOSED, PRUNED = "open", "closed", "pruned"


def apr_value(alloc: Allocation, team, req) -> float:
    """Fraction of total required trait mass still unmet; 0 means valid."""
    total = float(req.entries.sum())
    if total == 0.0:
        return 0.0
    unmet = np.maximum(req.entries - aggregate_traits(alloc, team), 0.0)
    return float(unmet.sum()) / total


def nsq_value(mk: float, lb: float, ub: float) -> float:
    """Makespan normalized between the analytic bounds, clamped to [0, 1]."""
    if ub <= lb:
        return 0.0
    return min(1.0, max(0.0, (mk - lb) / (ub - lb)))


def tetaq_value(apr: float, nsq: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * apr + (1.0 - alpha) * nsq


@dataclass
class AllocationNode:
    allocation: Allocation
    parent: "AllocationNode | None"
    schedule: Schedule | None
    apr: float
    nsq: float
    tetaq: float
    status: str
    seq: int
    # False while nsq/tetaq are a lower bound (schedule not yet solved);
    # the pop loop solves lazily and re-queues with the exact priority,
    # which preserves best-first order while skipping nodes that never
    # reach the top of the frontier.
    exact: bool = True
    est_makespan: float = math.nan  # straight-line-provider makespan, once solved
    version: int = 0  # bumped on re-prioritization; stale heap entries skipped

    @property
    def assignments(self) -> int:
        return resource_count(self.allocation)


@dataclass
class Solution:
    allocation: Allocation
    schedule: Schedule
    motion_plans: dict[tuple[int, tuple, tuple], MotionPlan]
    node: AllocationNode

    @property
    def makespan(self) -> float:
        return self.schedule.makespan


@dataclass
class SearchStats:
    expansions: int = 0
    scheduler_calls: int = 0
    nodes_touched: int = 0


@dataclass
class SearchState:
    """Everything the search owns, retained afterwards for targeted repair."""

    domain: ProblemDomain
    alpha: float
    roadmap: Roadmap
    plan_cache: PlanCache
    lb: float
    ub: float
    prm_samples: int = 200
    prm_k: int = 8
    seed: int = 0
    open_heap: list = field(default_factory=list)
    nodes: dict[bytes, AllocationNode] = field(default_factory=dict)
    schedule_memo: dict = field(default_factory=dict)
    stats: SearchStats = field(default_factory=SearchStats)
    repair_reads: int = 0  # bumped whenever repair reuses this state
    _seq: itertools.count = field(default_factory=itertools.count)

    def with_status(self, status: str) -> list[AllocationNode]:
        return [n for n in self.nodes.values() if n.status == status]

    def open_nodes(self):
        return self.with_status(OPEN)

    def push(self, node: AllocationNode) -> None:
        node.version += 1
        heapq.heappush(
            self.open_heap,
            (node.tetaq, node.assignments, node.seq, node.version, id(node), node),
        )

    def pop(self) -> AllocationNode | None:
        while self.open_heap:
            _, _, _, version, _, node = heapq.heappop(self.open_heap)
            if node.status == OPEN and node.version == version:
                return node
        return None

    def rebuild_heap(self) -> None:
        """Re-key every open node after bulk priority updates."""
        self.open_heap = []
        for node in self.nodes.values():
            if node.status == OPEN:
                self.push(node)


def new_state(
    domain: ProblemDomain,
    alpha: float,
    prm_samples: int = 200,
    prm_k: int = 8,
    seed: int = 0,
) -> SearchState:
    roadmap = motion.build_roadmap(
        domain.world, motion.mandatory_vertices(domain), prm_samples, prm_k, seed
    )
    durations = [t.duration for t in domain.network.tasks]
    state = SearchState(
        domain=domain,
        alpha=alpha,
        roadmap=roadmap,
        plan_cache=PlanCache(),
        lb=schedule_lower_bound(durations),
        ub=schedule_upper_bound(domain.world, durations, roadmap.total_edge_length),
        prm_samples=prm_samples,
        prm_k=prm_k,
        seed=seed,
    )
    root_alloc = Allocation(np.zeros((domain.n_tasks, domain.n_robots), dtype=np.int8))
    root = make_node(state, root_alloc, parent=None)
    if root.status == OPEN:
        state.push(root)
    return state


def solve_with_memo(state: SearchState, problem: SchedulingProblem) -> Schedule | None:
    key = problem.key()
    if key not in state.schedule_memo:
        state.stats.scheduler_calls += 1
        state.schedule_memo[key] = solve_schedule(problem)
    return state.schedule_memo[key]


def evaluate(state: SearchState, alloc: Allocation, travel=None):
    """Schedule an allocation and score it; returns (schedule, apr, nsq, tetaq).

    ``schedule`` is None when the induced constraints are infeasible (the
    caller prunes such nodes).
    """
    if travel is None:
        travel = motion.plan_provider(state.domain, state.roadmap, state.plan_cache)
    problem = build_scheduling_problem(state.domain, alloc, travel)
    sched = solve_with_memo(state, problem)
    apr = apr_value(alloc, state.domain.team, state.domain.requirements)
    if sched is None:
        return None, apr, math.nan, math.nan
    nsq = nsq_value(sched.makespan, state.lb, state.ub)
    return sched, apr, nsq, tetaq_value(apr, nsq, state.alpha)


def _inherited_schedule(
    state: SearchState, parent: AllocationNode | None, task: int | None, robot: int | None
) -> Schedule | None:
    """Parent's schedule when the new assignment provably cannot change it.

    Adding a robot that is assigned nowhere else introduces no mutex pair
    and only raises the task's arrival floor; if the parent's optimal start
    already clears the new floor, the parent's schedule stays optimal (the
    child's constraints are a superset, so it cannot do better).
    """
    if parent is None or parent.schedule is None or task is None:
        return None
    if parent.allocation.entries[:, robot].any():
        return None
    domain = state.domain
    rid = domain.team.robot_ids[robot]
    cid = motion.capability_classes(domain.team, domain.world)[rid]
    p = motion.plan(
        state.roadmap,
        domain.world.robot_start_configs[rid],
        domain.network.tasks[task].initial_config,
        cid,
        domain.world.robot_speeds[rid],
        state.plan_cache,
    )
    if p is not None and p.duration <= parent.schedule.start_times[task] + 1e-12:
        return parent.schedule
    return None


def make_node(
    state: SearchState,
    alloc: Allocation,
    parent: AllocationNode | None,
    new_assignment: tuple[int, int] | None = None,
) -> AllocationNode:
    """Register an allocation as a node; scheduling is deferred when possible.

    A child's feasible region is a subset of its parent's, so the parent's
    makespan lower-bounds the child's and the parent's nsq is a sound
    priority bound. Children therefore enter the frontier unsolved; the
    root (and children whose schedule is provably inherited) are exact
    immediately.
    """
    task, robot = new_assignment if new_assignment is not None else (None, None)
    apr = apr_value(alloc, state.domain.team, state.domain.requirements)
    inherited = _inherited_schedule(state, parent, task, robot)
    if inherited is not None:
        sched = inherited
        nsq = nsq_value(sched.makespan, state.lb, state.ub)
        node = AllocationNode(
            allocation=alloc,
            parent=parent,
            schedule=sched,
            apr=apr,
            nsq=nsq,
            tetaq=tetaq_value(apr, nsq, state.alpha),
            status=OPEN,
            seq=next(state._seq),
            est_makespan=sched.makespan,
        )
    elif parent is None:
        sched, apr, nsq, tq = evaluate(state, alloc)
        node = AllocationNode(
            allocation=alloc,
            parent=parent,
            schedule=sched,
            apr=apr,
            nsq=nsq,
            tetaq=tq,
            status=OPEN if sched is not None else PRUNED,
            seq=next(state._seq),
            est_makespan=sched.makespan if sched is not None else math.nan,
        )
    else:
        mk_floor = parent.est_makespan if math.isfinite(parent.est_makespan) else 0.0
        nsq = nsq_value(mk_floor, state.lb, state.ub)
        node = AllocationNode(
            allocation=alloc,
            parent=parent,
            schedule=None,
            apr=apr,
            nsq=nsq,
            tetaq=tetaq_value(apr, nsq, state.alpha),
            status=OPEN,
            seq=next(state._seq),
            exact=False,
        )
    state.nodes[alloc.key()] = node
    return node


def materialize(state: SearchState, node: AllocationNode) -> bool:
    """Solve a lazily queued node's schedule; False when it is infeasible."""
    if node.exact:
        return node.status != PRUNED
    sched, apr, nsq, tq = evaluate(state, node.allocation)
    node.exact = True
    node.apr = apr
    node.schedule = sched
    if sched is None:
        node.status = PRUNED
        return False
    node.nsq = nsq
    node.tetaq = tq
    node.est_makespan = sched.makespan
    return True


def expand(state: SearchState, node: AllocationNode) -> list[AllocationNode]:
    """Generate all one-assignment children; dedup against the whole graph."""
    state.stats.expansions += 1
    children = []
    a = node.allocation.entries
    for m in range(a.shape[0]):
        for n in range(a.shape[1]):
            if a[m, n]:
                continue
            child_alloc = node.allocation.with_assignment(m, n)
            if child_alloc.key() in state.nodes:
                continue
            child = make_node(state, child_alloc, parent=node, new_assignment=(m, n))
            if child.status == OPEN:
                state.push(child)
            children.append(child)
    node.status = CLOSED
    return children


def required_transitions(
    state: SearchState, alloc: Allocation, schedule: Schedule
) -> list[tuple[str, tuple, tuple]]:
    """(robot_id, from, to) trips the schedule's travel times rely on."""
    domain = state.domain
    net = domain.network
    a = alloc.entries
    ids = domain.team.robot_ids
    starts = domain.world.robot_start_configs
    trips: list[tuple[str, tuple, tuple]] = []
    for m in range(net.n_tasks):
        for n in np.flatnonzero(a[m]):
            rid = ids[int(n)]
            trips.append((rid, starts[rid], net.tasks[m].initial_config))
            trips.append((rid, net.tasks[m].initial_config, net.tasks[m].terminal_config))
    ordered = set(net.precedence_edges) | set(schedule.fixed_orderings.values())
    for i, j in ordered:
        shared = np.flatnonzero(a[i] & a[j])
        for n in shared:
            rid = ids[int(n)]
            trips.append((rid, net.tasks[i].terminal_config, net.tasks[j].initial_config))
    return trips


def instantiate_plans(
    state: SearchState, alloc: Allocation, schedule: Schedule
) -> dict[tuple[int, tuple, tuple], MotionPlan] | None:
    """Plan every required trip; None when any trip is disconnected."""
    classes = motion.capability_classes(state.domain.team, state.domain.world)
    speeds = state.domain.world.robot_speeds
    plans: dict[tuple[int, tuple, tuple], MotionPlan] = {}
    for rid, frm, to in required_transitions(state, alloc, schedule):
        cid = classes[rid]
        p = motion.plan(state.roadmap, frm, to, cid, speeds[rid], state.plan_cache)
        if p is None:
            return None
        plans[(cid, tuple(frm), tuple(to))] = p
    return plans


@dataclass
class SearchResult:
    solution: Solution | None
    reason: str  # solved | exhausted | limit-expansions | limit-time
    min_open_apr: float
    state: SearchState

    @property
    def exhausted(self) -> bool:
        return self.solution is None


def makespan_floor(node: AllocationNode) -> float:
    """A value provably no larger than any descendant's optimal makespan.

    Constraints only accumulate down the tree, so an exact node's own
    makespan floors its subtree; a lazy node inherits its parent's.
    """
    if node.exact and node.schedule is not None:
        return node.schedule.makespan
    if node.parent is not None and math.isfinite(node.parent.est_makespan):
        return node.parent.est_makespan
    return 0.0


def min_open_apr(state: SearchState) -> float:
    values = [n.apr for n in state.nodes.values() if n.status == OPEN]
    return min(values, default=1.0)


def run_search(
    state: SearchState,
    max_expansions: int = 100_000,
    max_seconds: float = 300.0,
) -> SearchResult:
    """Pop-best loop; goal = zero apr with a plan-backed feasible schedule."""
    t0 = time.monotonic()
    while True:
        if state.stats.expansions >= max_expansions:
            return SearchResult(None, "limit-expansions", min_open_apr(state), state)
        if time.monotonic() - t0 > max_seconds:
            return SearchResult(None, "limit-time", min_open_apr(state), state)
        node = state.pop()
        if node is None:
            return SearchResult(None, "exhausted", min_open_apr(state), state)
        if not node.exact:
            # re-queue with the exact priority; best-first order over exact
            # values is preserved because the bound never overestimates
            if materialize(state, node):
                state.push(node)
            continue
        state.stats.nodes_touched += 1
        if node.apr <= APR_TOL:
            plans = instantiate_plans(state, node.allocation, node.schedule)
            if plans is None:
                node.status = PRUNED
                continue
            node.status = CLOSED
            return SearchResult(
                Solution(node.allocation, node.schedule, plans, node),
                "solved",
                min_open_apr(state),
                state,
            )
        expand(state, node)


def search(
    domain: ProblemDomain,
    alpha: float,
    prm_samples: int = 200,
    prm_k: int = 8,
    seed: int = 0,
    max_expansions: int = 100_000,
    max_seconds: float = 300.0,
) -> SearchResult:
    """Solve a fresh problem end to end, retaining the state for repair."""
    state = new_state(domain, alpha, prm_samples, prm_k, seed)
    return run_search(state, max_expansions, max_seconds)
