"""Event application and targeted repair across all eight event kinds."""

import copy
import math

import numpy as np
import pytest

from dynalloc.domain import resource_count
from dynalloc.generator import generate_event, generate_problem
from dynalloc.repair import (
    DynamicEvent,
    EventError,
    EventKind,
    apply_event,
    decompose_mixed,
    repair,
)
from dynalloc.search import search
from dynalloc.validation import solution_violations

from conftest import build_domain

ALL_KINDS = list(EventKind)


def _solved(domain, alpha=0.25, **kw):
    result = search(domain, alpha, **kw)
    assert result.reason == "solved"
    return result


class TestApplyEvent:
    def test_agent_lost_removes_everywhere(self, desk_domain):
        ev = DynamicEvent(1.0, EventKind.AGENT_LOST, {"agent": "r1"})
        new = apply_event(desk_domain, ev)
        assert "r1" not in new.team.robot_ids
        assert "r1" not in new.world.robot_start_configs
        assert "r1" not in new.world.robot_speeds
        assert new.n_robots == desk_domain.n_robots - 1

    def test_task_lost_reindexes_edges(self):
        domain = build_domain(
            [[1.0]], [[1.0], [1.0], [1.0]], precedence={(0, 2)}, mutex={(1, 2)}
        )
        new = apply_event(domain, DynamicEvent(0.0, EventKind.TASK_LOST, {"task": "t1"}))
        assert new.n_tasks == 2
        # t2 shifted down to index 1; the (0, 2) precedence follows it
        assert new.network.precedence_edges == frozenset({(0, 1)})
        assert new.network.mutex_edges == frozenset()

    def test_trait_change_sign_validation(self, desk_domain):
        names = desk_domain.team.trait_names
        up = {n: float(v) + 1.0 for n, v in zip(names, desk_domain.team.entries[0])}
        with pytest.raises(EventError):
            apply_event(
                desk_domain,
                DynamicEvent(0.0, EventKind.TRAITS_REDUCED, {"agent": "r0", "traits": up}),
            )
        down = {n: 0.0 for n in names}
        with pytest.raises(EventError):
            apply_event(
                desk_domain,
                DynamicEvent(0.0, EventKind.TRAITS_INCREASED, {"agent": "r0", "traits": down}),
            )

    def test_requirement_change_sign_validation(self, desk_domain):
        names = desk_domain.team.trait_names
        tid = desk_domain.network.tasks[0].id
        down = {n: 0.0 for n in names}
        with pytest.raises(EventError):
            apply_event(
                desk_domain,
                DynamicEvent(
                    0.0, EventKind.REQUIREMENTS_INCREASED, {"task": tid, "requires": down}
                ),
            )

    def test_unknown_ids_rejected(self, desk_domain):
        with pytest.raises(EventError):
            apply_event(
                desk_domain, DynamicEvent(0.0, EventKind.AGENT_LOST, {"agent": "ghost"})
            )
        with pytest.raises(EventError):
            apply_event(
                desk_domain,
                DynamicEvent(
                    0.0,
                    EventKind.TRAITS_REDUCED,
                    {"agent": "r0", "traits": {"no_such_trait": 0.0}},
                ),
            )

    def test_new_agent_appends_row(self, desk_domain):
        names = desk_domain.team.trait_names
        ev = DynamicEvent(
            0.0,
            EventKind.NEW_AGENT,
            {
                "agent": {
                    "id": "rx",
                    "traits": {names[0]: 1.5},
                    "start": [5.0, 5.0],
                    "speed": 2.0,
                }
            },
        )
        new = apply_event(desk_domain, ev)
        assert new.n_robots == desk_domain.n_robots + 1
        assert new.team.robot_ids[-1] == "rx"
        assert new.world.robot_speeds["rx"] == 2.0

    def test_iteration_counter_advances(self, desk_domain):
        ev = generate_event(desk_domain, EventKind.DURATION_CHANGED, 0)
        assert apply_event(desk_domain, ev).iteration == desk_domain.iteration + 1


class TestDecomposeMixed:
    def test_mixed_trait_change_splits(self, desk_domain):
        names = desk_domain.team.trait_names
        old = desk_domain.team.entries[0]
        mixed = dict(zip(names, old.tolist()))
        mixed[names[0]] = float(old[0]) + 1.0
        mixed[names[-1]] = 0.0
        ev = DynamicEvent(0.0, EventKind.TRAITS_INCREASED, {"agent": "r0", "traits": mixed})
        steps = decompose_mixed(desk_domain, ev)
        assert [s.kind for s in steps] == [
            EventKind.TRAITS_REDUCED,
            EventKind.TRAITS_INCREASED,
        ]
        # applying both steps lands on the mixed target row
        d = apply_event(desk_domain, steps[0])
        d = apply_event(d, steps[1])
        assert np.allclose(d.team.entries[0], [mixed[n] for n in names])

    def test_pure_change_passes_through(self, desk_domain):
        ev = generate_event(desk_domain, EventKind.TRAITS_REDUCED, 3)
        assert decompose_mixed(desk_domain, ev) == [ev]


class TestRepair:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=[k.value for k in ALL_KINDS])
    def test_every_kind_yields_valid_solution(self, kind):
        domain = generate_problem(3, 4, 5, 3)
        result = _solved(domain)
        ev = generate_event(domain, kind, seed=11)
        new_domain = apply_event(domain, ev)
        repaired = repair(result.state, result.solution, ev)
        if repaired.solution is None:
            # acceptable only when the mutated domain truly has no solution
            fresh = search(new_domain, 0.25)
            assert fresh.solution is None
        else:
            assert solution_violations(new_domain, repaired.solution, repaired.state) == []

    def test_repair_counts_as_state_reuse(self):
        domain = generate_problem(0, 3, 4, 3)
        result = _solved(domain)
        ev = generate_event(domain, EventKind.DURATION_CHANGED, 5)
        assert result.state.repair_reads == 0
        repair(result.state, result.solution, ev)
        assert result.state.repair_reads == 1

    def test_requirements_reduced_keeps_old_allocation(self):
        """A strictly easier problem re-certifies the old solution directly."""
        domain = generate_problem(1, 3, 4, 3)
        result = _solved(domain)
        ev = generate_event(domain, EventKind.REQUIREMENTS_REDUCED, 9)
        before = result.solution.allocation.key()
        repaired = repair(result.state, result.solution, ev)
        assert repaired.reason == "solved"
        assert repaired.solution.allocation.key() == before
        assert repaired.state.stats.expansions == result.state.stats.expansions

    def test_agent_loss_drops_affected_nodes(self):
        domain = generate_problem(2, 3, 4, 3)
        result = _solved(domain)
        lost = "r0"
        ev = DynamicEvent(1.0, EventKind.AGENT_LOST, {"agent": lost})
        repaired = repair(result.state, result.solution, ev)
        for node in repaired.state.nodes.values():
            assert node.allocation.entries.shape[1] == domain.n_robots - 1
        if repaired.solution is not None:
            new_domain = apply_event(domain, ev)
            assert solution_violations(new_domain, repaired.solution, repaired.state) == []

    def test_new_agent_widens_every_node(self):
        domain = generate_problem(4, 3, 4, 3)
        result = _solved(domain)
        ev = generate_event(domain, EventKind.NEW_AGENT, 13)
        repaired = repair(result.state, result.solution, ev)
        for node in repaired.state.nodes.values():
            assert node.allocation.entries.shape[1] == domain.n_robots + 1

    def test_repair_on_copied_state_matches_original(self):
        """Timing harnesses deepcopy the state; repair must accept the copy."""
        domain = generate_problem(5, 3, 4, 3)
        result = _solved(domain)
        ev = generate_event(domain, EventKind.TRAITS_REDUCED, 21)
        copied = copy.deepcopy(result.state)
        a = repair(copied, result.solution, ev)
        b = repair(result.state, result.solution, ev)
        assert (a.solution is None) == (b.solution is None)
        if a.solution is not None:
            assert a.solution.allocation.key() == b.solution.allocation.key()
            assert a.solution.makespan == pytest.approx(b.solution.makespan, abs=1e-9)

    def test_noop_duration_change_is_idempotent(self):
        domain = generate_problem(6, 3, 4, 3)
        result = _solved(domain)
        task = domain.network.tasks[0]
        ev = DynamicEvent(
            0.0, EventKind.DURATION_CHANGED, {"task": task.id, "duration": task.duration}
        )
        repaired = repair(result.state, result.solution, ev)
        assert repaired.reason == "solved"
        assert repaired.solution.allocation.key() == result.solution.allocation.key()
        assert repaired.solution.makespan == pytest.approx(
            result.solution.makespan, abs=1e-9
        )

    def test_negative_event_time_rejected(self):
        with pytest.raises(Exception):
            DynamicEvent(-1.0, EventKind.AGENT_LOST, {"agent": "r0"})
