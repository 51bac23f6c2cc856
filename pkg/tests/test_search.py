"""Best-first allocation search: goals, ordering, laziness, monotonicity."""

import math

import numpy as np
import pytest

from dynalloc.analysis import brute_force_optimal_makespan, oracle_travel
from dynalloc.domain import resource_count
from dynalloc.generator import generate_problem
from dynalloc.search import (
    CLOSED,
    OPEN,
    PRUNED,
    apr_value,
    expand,
    make_node,
    materialize,
    min_open_apr,
    new_state,
    nsq_value,
    run_search,
    search,
    tetaq_value,
)
from dynalloc.validation import solution_violations

from conftest import build_domain


class TestScores:
    def test_nsq_clamps_and_normalizes(self):
        assert nsq_value(5.0, 0.0, 10.0) == 0.5
        assert nsq_value(-1.0, 0.0, 10.0) == 0.0
        assert nsq_value(99.0, 0.0, 10.0) == 1.0
        assert nsq_value(3.0, 5.0, 5.0) == 0.0  # degenerate interval

    def test_tetaq_mixes_convexly(self):
        assert tetaq_value(0.4, 0.8, 0.25) == pytest.approx(0.25 * 0.4 + 0.75 * 0.8)
        with pytest.raises(ValueError):
            tetaq_value(0.0, 0.0, 1.5)


class TestTrivialGoals:
    def test_zero_requirements_solved_at_root(self, empty_req_domain):
        result = search(empty_req_domain, 0.25, prm_samples=50, prm_k=5)
        assert result.reason == "solved"
        assert resource_count(result.solution.allocation) == 0
        assert result.state.stats.expansions == 0

    def test_single_robot_single_task(self, tiny_domain):
        result = search(tiny_domain, 0.25, prm_samples=50, prm_k=5)
        assert result.reason == "solved"
        assert result.solution.allocation.entries.tolist() == [[1]]
        assert solution_violations(tiny_domain, result.solution, result.state) == []

    def test_coalition_of_two_required(self, pair_domain):
        result = search(pair_domain, 0.25, prm_samples=50, prm_k=5)
        assert result.reason == "solved"
        assert result.solution.allocation.entries.tolist() == [[1, 1]]

    def test_unsatisfiable_requirements_exhaust(self):
        domain = build_domain([[1.0]], [[5.0]])
        result = search(domain, 0.25, prm_samples=50, prm_k=5)
        assert result.solution is None
        assert result.reason == "exhausted"
        # the frontier emptied, so min_open_apr reports the default
        assert result.min_open_apr == 1.0

    def test_expansion_limit_reported(self, desk_domain):
        result = search(desk_domain, 0.25, max_expansions=0)
        assert result.reason in ("limit-expansions", "solved")


class TestLaziness:
    def test_lazy_children_materialize_on_pop(self, desk_domain):
        state = new_state(desk_domain, 0.25, prm_samples=100, prm_k=6)
        root = state.pop()
        children = expand(state, root)
        lazy = [c for c in children if not c.exact]
        assert lazy, "expansion should defer scheduling"
        node = lazy[0]
        bound = node.tetaq
        assert materialize(state, node)
        assert node.exact and node.schedule is not None
        # the bound never overestimates the exact priority
        assert node.tetaq >= bound - 1e-12

    def test_lazy_matches_eager_solution(self):
        """Forcing immediate evaluation must not change the solution."""
        for seed in (0, 1, 2):
            domain = generate_problem(seed, 3, 4, 3)
            lazy_result = search(domain, 0.25, seed=0)
            eager_state = new_state(domain, 0.25, seed=0)
            while True:
                node = eager_state.pop()
                assert node is not None
                if not node.exact:
                    if materialize(eager_state, node):
                        eager_state.push(node)
                    continue
                if node.apr <= 1e-12:
                    break
                for child in expand(eager_state, node):
                    # eager: solve every child right away and re-key it
                    if child.status == OPEN and not child.exact:
                        if materialize(eager_state, child):
                            eager_state.push(child)
            assert lazy_result.reason == "solved"
            assert node.allocation.key() == lazy_result.solution.allocation.key()
            assert node.schedule.makespan == pytest.approx(
                lazy_result.solution.makespan, abs=1e-9
            )


class TestMonotonicity:
    def test_child_scores_move_the_right_way(self):
        for seed in (0, 3):
            domain = generate_problem(seed, 3, 4, 3)
            result = search(domain, 0.3, seed=0)
            assert result.reason == "solved"
            for node in result.state.nodes.values():
                if node.parent is None:
                    continue
                assert node.apr <= node.parent.apr + 1e-12
                if (
                    node.exact
                    and node.parent.exact
                    and node.schedule is not None
                    and node.parent.schedule is not None
                ):
                    assert node.nsq >= node.parent.nsq - 1e-9


class TestOptimality:
    def test_alpha_zero_finds_time_optimal(self):
        """With alpha=0 the search orders nodes purely by schedule quality."""
        for seed in (0, 1):
            domain = generate_problem(seed, 2, 3, 2)
            result = search(domain, 0.0, seed=0)
            assert result.reason == "solved"
            optimal = brute_force_optimal_makespan(
                domain, oracle_travel(domain, seed=0)
            )
            assert result.solution.makespan == pytest.approx(optimal, abs=1e-9)

    def test_solution_backed_by_plans(self, desk_domain):
        result = search(desk_domain, 0.25)
        assert result.reason == "solved"
        assert result.solution.motion_plans
        for plan in result.solution.motion_plans.values():
            assert plan is not None


class TestStateBookkeeping:
    def test_nodes_deduplicated_by_allocation(self, desk_domain):
        result = search(desk_domain, 0.25)
        keys = [n.allocation.key() for n in result.state.nodes.values()]
        assert len(keys) == len(set(keys))

    def test_stale_heap_entries_skipped(self, desk_domain):
        state = new_state(desk_domain, 0.25)
        root = state.pop()
        state.push(root)
        root.tetaq = 0.99
        state.push(root)  # re-push bumps the version; the old entry is stale
        popped = state.pop()
        assert popped is root
        assert state.pop() is None or state.pop() is not root

    def test_min_open_apr_tracks_frontier(self, desk_domain):
        state = new_state(desk_domain, 0.25)
        assert min_open_apr(state) == pytest.approx(
            apr_value(
                next(iter(state.nodes.values())).allocation,
                desk_domain.team,
                desk_domain.requirements,
            )
        )
