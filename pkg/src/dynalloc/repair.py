"""Targeted repair of a retained search state after a domain mutation.

Each event kind touches only the node sets it can actually invalidate:
losses delete nodes that reference the lost agent or task, capability or
requirement shifts rescore the open frontier (and, for favorable shifts,
rescan closed/pruned nodes for newly viable allocations), duration changes
rescore schedules on the frontier, and a new agent widens every allocation
and seeds fresh root children. Everything else is conserved, and the
search is then simply resumed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import motion, search as search_mod
from .domain import (
    Allocation,
    DesiredTraitMatrix,
    DomainError,
    ProblemDomain,
    TaskNetwork,
    TaskSpec,
    TeamTraitMatrix,
    WorldModel,
)
from .scheduler import schedule_lower_bound, schedule_upper_bound
from .search import (
    APR_TOL,
    CLOSED,
    OPEN,
    PRUNED,
    SearchResult,
    SearchState,
    apr_value,
    evaluate,
    instantiate_plans,
    make_node,
    nsq_value,
    run_search,
    tetaq_value,
)


class EventKind(enum.Enum):
    AGENT_LOST = "agent_lost"
    TASK_LOST = "task_lost"
    TRAITS_REDUCED = "traits_reduced"
    REQUIREMENTS_INCREASED = "requirements_increased"
    TRAITS_INCREASED = "traits_increased"
    REQUIREMENTS_REDUCED = "requirements_reduced"
    DURATION_CHANGED = "duration_changed"
    NEW_AGENT = "new_agent"


@dataclass(frozen=True)
class DynamicEvent:
    time: float
    kind: EventKind
    payload: dict

    def __post_init__(self):
        if self.time < 0:
            raise DomainError("event time must be non-negative")


class EventError(DomainError):
    pass


def _trait_row(domain: ProblemDomain, mapping: dict) -> np.ndarray:
    names = domain.team.trait_names
    unknown = set(mapping) - set(names)
    if unknown:
        raise EventError(f"unknown trait names {sorted(unknown)}")
    return np.array([float(mapping.get(n, 0.0)) for n in names])


def _robot_index(domain: ProblemDomain, agent_id: str) -> int:
    try:
        return domain.team.robot_ids.index(agent_id)
    except ValueError:
        raise EventError(f"unknown agent id {agent_id!r}") from None


def apply_event(domain: ProblemDomain, event: DynamicEvent) -> ProblemDomain:
    """Produce the next domain iteration with exactly this mutation applied."""
    net, team, req, world = domain.network, domain.team, domain.requirements, domain.world
    kind, payload = event.kind, event.payload

    if kind == EventKind.AGENT_LOST:
        idx = _robot_index(domain, payload["agent"])
        rid = team.robot_ids[idx]
        team = TeamTraitMatrix(
            np.delete(team.entries, idx, axis=0),
            team.robot_ids[:idx] + team.robot_ids[idx + 1 :],
            team.trait_names,
        )
        world = WorldModel(
            world.bounds,
            world.obstacles,
            {k: v for k, v in world.robot_start_configs.items() if k != rid},
            {k: v for k, v in world.robot_speeds.items() if k != rid},
        )

    elif kind == EventKind.TASK_LOST:
        idx = net.task_index(payload["task"])

        def shift(i: int) -> int:
            return i - 1 if i > idx else i

        net = TaskNetwork(
            net.tasks[:idx] + net.tasks[idx + 1 :],
            frozenset(
                (shift(i), shift(j))
                for i, j in net.precedence_edges
                if i != idx and j != idx
            ),
            frozenset(
                (shift(i), shift(j)) for i, j in net.mutex_edges if i != idx and j != idx
            ),
        )
        req = DesiredTraitMatrix(np.delete(req.entries, idx, axis=0))

    elif kind in (EventKind.TRAITS_REDUCED, EventKind.TRAITS_INCREASED):
        idx = _robot_index(domain, payload["agent"])
        row = _trait_row(domain, payload["traits"])
        old = team.entries[idx]
        if kind == EventKind.TRAITS_REDUCED and np.any(row > old + 1e-12):
            raise EventError("traits_reduced payload raises some trait value")
        if kind == EventKind.TRAITS_INCREASED and np.any(row < old - 1e-12):
            raise EventError("traits_increased payload lowers some trait value")
        entries = np.array(team.entries)
        entries[idx] = row
        team = TeamTraitMatrix(entries, team.robot_ids, team.trait_names)

    elif kind in (EventKind.REQUIREMENTS_INCREASED, EventKind.REQUIREMENTS_REDUCED):
        idx = net.task_index(payload["task"])
        row = _trait_row(domain, payload["requires"])
        old = req.entries[idx]
        if kind == EventKind.REQUIREMENTS_INCREASED and np.any(row < old - 1e-12):
            raise EventError("requirements_increased payload lowers a requirement")
        if kind == EventKind.REQUIREMENTS_REDUCED and np.any(row > old + 1e-12):
            raise EventError("requirements_reduced payload raises a requirement")
        entries = np.array(req.entries)
        entries[idx] = row
        req = DesiredTraitMatrix(entries)

    elif kind == EventKind.DURATION_CHANGED:
        idx = net.task_index(payload["task"])
        d = float(payload["duration"])
        if d < 0:
            raise EventError("duration must be non-negative")
        t = net.tasks[idx]
        tasks = list(net.tasks)
        tasks[idx] = TaskSpec(t.id, d, t.initial_config, t.terminal_config)
        net = TaskNetwork(tuple(tasks), net.precedence_edges, net.mutex_edges)

    elif kind == EventKind.NEW_AGENT:
        spec = payload["agent"]
        rid = spec["id"]
        if rid in team.robot_ids:
            raise EventError(f"agent id {rid!r} already exists")
        row = _trait_row(domain, spec["traits"])
        team = TeamTraitMatrix(
            np.vstack([team.entries, row]), team.robot_ids + (rid,), team.trait_names
        )
        starts = dict(world.robot_start_configs)
        speeds = dict(world.robot_speeds)
        starts[rid] = tuple(spec["start"])
        speeds[rid] = float(spec["speed"])
        world = WorldModel(world.bounds, world.obstacles, starts, speeds)

    else:  # pragma: no cover
        raise EventError(f"unknown event kind {kind}")

    return ProblemDomain(domain.iteration + 1, net, team, req, world)


def _refresh_bounds(state: SearchState) -> None:
    durations = [t.duration for t in state.domain.network.tasks]
    state.lb = schedule_lower_bound(durations)
    state.ub = schedule_upper_bound(
        state.domain.world, durations, state.roadmap.total_edge_length
    )


def _rescore_open_apr(state: SearchState) -> None:
    for node in state.open_nodes():
        node.apr = apr_value(node.allocation, state.domain.team, state.domain.requirements)
        node.tetaq = tetaq_value(node.apr, node.nsq, state.alpha)
    state.rebuild_heap()


def _revive(state: SearchState, node) -> None:
    """Move a closed/pruned node back to the frontier with fresh scores."""
    sched, apr, nsq, tq = evaluate(state, node.allocation)
    node.apr = apr
    node.exact = True
    if sched is None:
        node.status = PRUNED
        node.schedule = None
        return
    node.schedule = sched
    node.nsq = nsq
    node.tetaq = tq
    node.est_makespan = sched.makespan
    node.status = OPEN
    state.push(node)


def handle_agent_or_task_loss(state: SearchState, event: DynamicEvent, old_domain: ProblemDomain) -> None:
    """Drop every node referencing the lost agent or task, reindex the rest."""
    agent_loss = event.kind == EventKind.AGENT_LOST
    if agent_loss:
        idx = old_domain.team.robot_ids.index(event.payload["agent"])
        axis = 1
    else:
        idx = old_domain.network.task_index(event.payload["task"])
        axis = 0

    survivors: dict[bytes, object] = {}
    for node in state.nodes.values():
        uses = bool(node.allocation.entries.take(idx, axis=axis).any())
        if uses:
            node.status = PRUNED  # detached; not re-registered below
            continue
        node.allocation = Allocation(np.delete(node.allocation.entries, idx, axis=axis))
        survivors[node.allocation.key()] = node
    state.nodes = survivors

    if agent_loss:
        # surviving nodes never assigned the agent: aggregates, schedules,
        # and both scores are unchanged, so nothing is recomputed
        state.rebuild_heap()
        return

    # task loss: requirement mass and schedule indexing both changed
    _refresh_bounds(state)
    state.schedule_memo.clear()
    for node in state.nodes.values():
        node.apr = apr_value(node.allocation, state.domain.team, state.domain.requirements)
        if node.status == OPEN:
            if node.exact:
                sched, _, nsq, tq = evaluate(state, node.allocation)
                node.schedule = sched
                if sched is None:
                    node.status = PRUNED
                    continue
                node.nsq = nsq
                node.tetaq = tq
                node.est_makespan = sched.makespan
            else:
                # lazily queued: the old makespan floor is gone, so fall
                # back to the trivial (still sound) bound of zero
                node.nsq = 0.0
                node.tetaq = tetaq_value(node.apr, 0.0, state.alpha)
        elif node.status == CLOSED and node.apr <= APR_TOL:
            _revive(state, node)
    state.rebuild_heap()


def handle_decrease(state: SearchState, event: DynamicEvent) -> None:
    """Capabilities fell or requirements rose: only the frontier can improve."""
    _rescore_open_apr(state)


def handle_increase(state: SearchState, event: DynamicEvent) -> None:
    """Capabilities rose or requirements fell: stale nodes may now be viable."""
    _rescore_open_apr(state)
    for node in state.with_status(CLOSED) + state.with_status(PRUNED):
        apr = apr_value(node.allocation, state.domain.team, state.domain.requirements)
        node.apr = apr
        if apr <= APR_TOL:
            _revive(state, node)


def handle_duration_change(state: SearchState, event: DynamicEvent) -> None:
    """Durations moved: rescore frontier schedules; apr is untouched."""
    _refresh_bounds(state)
    for node in state.open_nodes():
        if node.exact:
            sched, _, nsq, tq = evaluate(state, node.allocation)
            node.schedule = sched
            if sched is None:
                node.status = PRUNED
                continue
            node.nsq = nsq
            node.tetaq = tq
            node.est_makespan = sched.makespan
        else:
            node.nsq = 0.0
            node.tetaq = tetaq_value(node.apr, 0.0, state.alpha)
    state.rebuild_heap()


def handle_new_agent(state: SearchState, event: DynamicEvent) -> None:
    """Widen every allocation and seed root children using the new agent."""
    widened: dict[bytes, object] = {}
    root = None
    for node in state.nodes.values():
        entries = node.allocation.entries
        node.allocation = Allocation(
            np.hstack([entries, np.zeros((entries.shape[0], 1), dtype=np.int8)])
        )
        widened[node.allocation.key()] = node
        if node.parent is None:
            root = node
    state.nodes = widened

    # the start config of the new agent must be a roadmap vertex
    state.roadmap = motion.build_roadmap(
        state.domain.world,
        motion.mandatory_vertices(state.domain),
        state.prm_samples,
        state.prm_k,
        state.seed,
    )
    state.plan_cache = motion.PlanCache()
    _refresh_bounds(state)
    # every retained schedule was solved against the old roadmap's travel
    # times, which the rebuild invalidated: demote to lazy (trivial sound
    # bound) so pops re-solve, and drop the stale makespan floors children
    # would otherwise inherit
    for node in state.nodes.values():
        node.est_makespan = math.nan
        if node.status == OPEN:
            node.exact = False
            node.schedule = None
            node.nsq = 0.0
            node.tetaq = tetaq_value(node.apr, 0.0, state.alpha)
    state.rebuild_heap()

    new_col = state.domain.n_robots - 1
    base = root.allocation if root is not None else Allocation(
        np.zeros((state.domain.n_tasks, state.domain.n_robots), dtype=np.int8)
    )
    for m in range(state.domain.n_tasks):
        child_alloc = base.with_assignment(m, new_col)
        if child_alloc.key() in state.nodes:
            continue
        child = make_node(state, child_alloc, parent=root)
        if child.status == OPEN:
            state.push(child)


_HANDLERS = {
    EventKind.AGENT_LOST: "loss",
    EventKind.TASK_LOST: "loss",
    EventKind.TRAITS_REDUCED: "decrease",
    EventKind.REQUIREMENTS_INCREASED: "decrease",
    EventKind.TRAITS_INCREASED: "increase",
    EventKind.REQUIREMENTS_REDUCED: "increase",
    EventKind.DURATION_CHANGED: "duration",
    EventKind.NEW_AGENT: "new_agent",
}


def decompose_mixed(domain: ProblemDomain, event: DynamicEvent) -> list[DynamicEvent]:
    """Split a sign-mixed trait/requirement row change into pure events."""
    if event.kind in (EventKind.TRAITS_REDUCED, EventKind.TRAITS_INCREASED):
        idx = _robot_index(domain, event.payload["agent"])
        old = domain.team.entries[idx]
        new = _trait_row(domain, event.payload["traits"])
        down_kind, up_kind = EventKind.TRAITS_REDUCED, EventKind.TRAITS_INCREASED
        key, ident = "traits", ("agent", event.payload["agent"])
    elif event.kind in (
        EventKind.REQUIREMENTS_INCREASED,
        EventKind.REQUIREMENTS_REDUCED,
    ):
        idx = domain.network.task_index(event.payload["task"])
        old = domain.requirements.entries[idx]
        new = _trait_row(domain, event.payload["requires"])
        down_kind, up_kind = (
            EventKind.REQUIREMENTS_REDUCED,
            EventKind.REQUIREMENTS_INCREASED,
        )
        key, ident = "requires", ("task", event.payload["task"])
    else:
        return [event]

    names = domain.team.trait_names
    has_down = bool(np.any(new < old - 1e-12))
    has_up = bool(np.any(new > old + 1e-12))
    if not (has_down and has_up):
        return [event]
    low = np.minimum(new, old)
    return [
        DynamicEvent(
            event.time,
            down_kind,
            {ident[0]: ident[1], key: dict(zip(names, low.tolist()))},
        ),
        DynamicEvent(
            event.time,
            up_kind,
            {ident[0]: ident[1], key: dict(zip(names, new.tolist()))},
        ),
    ]


def repair(
    state: SearchState,
    solution,
    event: DynamicEvent,
    max_expansions: int = 100_000,
    max_seconds: float = 300.0,
) -> SearchResult:
    """Mutate the retained state for one event and resume the search.

    The previous solution node is first returned to the frontier; after the
    kind-specific surgery it is re-certified under the new domain and, when
    it is still a goal, returned without any further expansion.
    """
    state.repair_reads += 1
    steps = decompose_mixed(state.domain, event)

    # resolve the solution's node inside *this* state (the caller may hand
    # us a copied state whose node objects are distinct from solution.node)
    sol_node = None
    if solution is not None:
        key = solution.allocation.key()
        sol_node = state.nodes.get(key)
        if sol_node is None:
            sol_node = solution.node
            state.nodes[key] = sol_node
        if sol_node.status != OPEN:
            sol_node.status = OPEN
            state.push(sol_node)

    for step in steps:
        old_domain = state.domain
        state.domain = apply_event(old_domain, step)
        kind = _HANDLERS[step.kind]
        if kind == "loss":
            handle_agent_or_task_loss(state, step, old_domain)
        elif kind == "decrease":
            handle_decrease(state, step)
        elif kind == "increase":
            handle_increase(state, step)
        elif kind == "duration":
            handle_duration_change(state, step)
        else:
            handle_new_agent(state, step)

    # fast path: the old solution may still be a goal under the new domain
    if sol_node is not None and sol_node.status == OPEN:
        if sol_node.allocation.key() in state.nodes:
            sched, apr, nsq, tq = evaluate(state, sol_node.allocation)
            sol_node.apr = apr
            sol_node.schedule = sched
            sol_node.exact = True
            if sched is not None:
                sol_node.est_makespan = sched.makespan
                sol_node.nsq, sol_node.tetaq = nsq, tq
                state.push(sol_node)
                if apr <= APR_TOL:
                    plans = instantiate_plans(
                        state, sol_node.allocation, sol_node.schedule
                    )
                    if plans is not None:
                        sol_node.status = CLOSED
                        return SearchResult(
                            search_mod.Solution(
                                sol_node.allocation, sol_node.schedule, plans, sol_node
                            ),
                            "solved",
                            search_mod.min_open_apr(state),
                            state,
                        )
                    sol_node.status = PRUNED
            else:
                sol_node.status = PRUNED

    return run_search(state, max_expansions, max_seconds)
