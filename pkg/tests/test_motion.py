"""Roadmap construction and plan queries against independent oracles."""

import math

import numpy as np
import pytest

from dynalloc.geometry import Circle
from dynalloc.motion import (
    PlanCache,
    RoadmapError,
    build_roadmap,
    capability_classes,
    estimate_travel_time,
    euclidean_provider,
    mandatory_vertices,
    plan,
    plan_provider,
)
from dynalloc.validation import plan_collision_samples

from conftest import build_domain


def _bellman_ford_shortest(roadmap, src, dst):
    """Independent shortest-path oracle: |V|-1 full relaxation sweeps."""
    n = len(roadmap.vertices)
    dist = [math.inf] * n
    dist[src] = 0.0
    for _ in range(n - 1):
        changed = False
        for u in range(n):
            for v, ln in roadmap.adjacency.get(u, ()):
                if dist[u] + ln < dist[v] - 1e-15:
                    dist[v] = dist[u] + ln
                    changed = True
        if not changed:
            break
    return dist[dst]


def _components(roadmap):
    """Flood-fill connectivity oracle."""
    seen = set()
    comps = []
    for start in range(len(roadmap.vertices)):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v, _ in roadmap.adjacency.get(u, ()):
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        seen |= comp
        comps.append(comp)
    return comps


@pytest.fixture
def world_and_mandatory(obstacle_domain):
    return obstacle_domain.world, mandatory_vertices(obstacle_domain)


class TestRoadmap:
    def test_deterministic_for_fixed_seed(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        a = build_roadmap(world, mandatory, 60, 5, seed=3)
        b = build_roadmap(world, mandatory, 60, 5, seed=3)
        assert a.vertices == b.vertices
        assert a.adjacency == b.adjacency
        assert a.total_edge_length == b.total_edge_length

    def test_mandatory_points_are_vertices(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        rm = build_roadmap(world, mandatory, 40, 5, seed=0)
        for p in mandatory:
            assert rm.vertex_index(p) >= 0

    def test_vertices_and_edges_avoid_obstacles(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        rm = build_roadmap(world, mandatory, 80, 6, seed=1)
        from dynalloc.geometry import point_in_any, segment_collides

        for v in rm.vertices:
            assert not point_in_any(v, world.obstacles)
        for u, nbrs in rm.adjacency.items():
            for v, _ in nbrs:
                assert not segment_collides(
                    rm.vertices[u], rm.vertices[v], world.obstacles
                )

    def test_unknown_vertex_lookup_raises(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        rm = build_roadmap(world, mandatory, 20, 4, seed=0)
        with pytest.raises(RoadmapError):
            rm.vertex_index((123.0, 456.0))

    def test_fully_blocked_world_raises(self):
        domain = build_domain(
            [[1.0]],
            [[1.0]],
            bounds=(0.0, 0.0, 4.0, 4.0),
            obstacles=[Circle((2.0, 2.0), 10.0)],
        )
        with pytest.raises(RoadmapError):
            build_roadmap(domain.world, [], 10, 3, seed=0, rejection_cap_factor=5)


class TestPlans:
    def test_plan_matches_bellman_ford(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        rm = build_roadmap(world, mandatory, 60, 5, seed=2)
        cache = PlanCache()
        for frm in mandatory[:3]:
            for to in mandatory[3:]:
                p = plan(rm, frm, to, class_id=0, speed=2.0, cache=cache)
                oracle = _bellman_ford_shortest(
                    rm, rm.vertex_index(frm), rm.vertex_index(to)
                )
                if p is None:
                    assert math.isinf(oracle)
                else:
                    assert p.length == pytest.approx(oracle, abs=1e-9)
                    assert p.duration == pytest.approx(oracle / 2.0, abs=1e-9)

    def test_disconnection_matches_flood_fill(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        # tiny sample count makes disconnection likely but not certain
        rm = build_roadmap(world, mandatory, 3, 1, seed=0)
        comps = _components(rm)
        vi = {p: rm.vertex_index(p) for p in mandatory}
        comp_of = {}
        for ci, comp in enumerate(comps):
            for v in comp:
                comp_of[v] = ci
        for frm in mandatory:
            for to in mandatory:
                p = plan(rm, frm, to, class_id=0, speed=1.0)
                connected = comp_of[vi[frm]] == comp_of[vi[to]]
                assert (p is not None) == connected

    def test_same_point_plan_is_free(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        rm = build_roadmap(world, mandatory, 20, 4, seed=0)
        p = plan(rm, mandatory[0], mandatory[0], class_id=0, speed=1.0)
        assert p.length == 0.0 and p.duration == 0.0

    def test_cache_shares_across_capability_class(self, world_and_mandatory):
        world, mandatory = world_and_mandatory
        rm = build_roadmap(world, mandatory, 40, 5, seed=0)
        cache = PlanCache()
        plan(rm, mandatory[0], mandatory[1], class_id=0, speed=1.0, cache=cache)
        assert cache.planner_calls == 1
        plan(rm, mandatory[0], mandatory[1], class_id=0, speed=1.0, cache=cache)
        assert cache.planner_calls == 1 and cache.hits == 1
        plan(rm, mandatory[0], mandatory[1], class_id=1, speed=1.0, cache=cache)
        assert cache.planner_calls == 2  # other class: separate entry

    def test_plans_pass_collision_oracle(self, obstacle_domain):
        world = obstacle_domain.world
        mandatory = mandatory_vertices(obstacle_domain)
        rm = build_roadmap(world, mandatory, 120, 8, seed=0)
        for frm in mandatory:
            for to in mandatory:
                p = plan(rm, frm, to, class_id=0, speed=1.0)
                if p is not None:
                    assert plan_collision_samples(p, world.obstacles)


class TestProviders:
    def test_capability_classes_group_by_traits_and_speed(self):
        domain = build_domain(
            [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            [[1.0, 1.0]],
            speeds={"r0": 1.0, "r1": 1.0, "r2": 1.0},
        )
        classes = capability_classes(domain.team, domain.world)
        assert classes["r0"] == classes["r1"]
        assert classes["r0"] != classes["r2"]

    def test_euclidean_is_a_lower_bound_on_plans(self, obstacle_domain):
        mandatory = mandatory_vertices(obstacle_domain)
        rm = build_roadmap(obstacle_domain.world, mandatory, 120, 8, seed=0)
        euclid = euclidean_provider(obstacle_domain)
        planned = plan_provider(obstacle_domain, rm, PlanCache())
        for frm in mandatory:
            for to in mandatory:
                t = planned("r0", frm, to)
                if math.isfinite(t):
                    assert euclid("r0", frm, to) <= t + 1e-9

    def test_estimate_rejects_bad_speed(self):
        with pytest.raises(ValueError):
            estimate_travel_time((0.0, 0.0), (1.0, 0.0), 0.0)
