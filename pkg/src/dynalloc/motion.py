"""Probabilistic roadmap planning with memoized, capability-shared plans.

The roadmap is built once per world with every task site and robot start
forced in as a vertex, so path queries never need on-the-fly sampling.
Plans are cached per capability class: robots with identical trait rows
and speed reuse each other's plans.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import ProblemDomain, TeamTraitMatrix, WorldModel
from .geometry import Point, point_in_any, segment_collides


class RoadmapError(Exception):
    pass


@dataclass(frozen=True)
class Roadmap:
    vertices: tuple[Point, ...]
    adjacency: dict[int, tuple[tuple[int, float], ...]]
    total_edge_length: float

    def vertex_index(self, p: Point) -> int:
        # mandatory vertices are inserted exactly, so lookup is by equality
        try:
            return self.vertices.index(tuple(p))
        except ValueError:
            raise RoadmapError(f"point {p} is not a roadmap vertex") from None


@dataclass(frozen=True)
class MotionPlan:
    waypoints: tuple[Point, ...]
    length: float
    duration: float


@dataclass
class PlanCache:
    entries: dict[tuple[int, Point, Point], MotionPlan | None] = field(default_factory=dict)
    hits: int = 0
    planner_calls: int = 0

    def lookup(self, class_id: int, frm: Point, to: Point):
        """Returns (found, plan). ``plan`` may be None for a cached miss-path."""
        key = (class_id, tuple(frm), tuple(to))
        if key in self.entries:
            self.hits += 1
            return True, self.entries[key]
        return False, None

    def store(self, class_id: int, frm: Point, to: Point, plan: MotionPlan | None) -> None:
        self.entries[(class_id, tuple(frm), tuple(to))] = plan


def capability_classes(team: TeamTraitMatrix, world: WorldModel) -> dict[str, int]:
    """Group robots by exact (trait row, speed) equality."""
    classes: dict[tuple, int] = {}
    out: dict[str, int] = {}
    for i, rid in enumerate(team.robot_ids):
        sig = (tuple(team.entries[i].tolist()), world.robot_speeds[rid])
        if sig not in classes:
            classes[sig] = len(classes)
        out[rid] = classes[sig]
    return out


def mandatory_vertices(domain: ProblemDomain) -> list[Point]:
    pts: list[Point] = []
    for t in domain.network.tasks:
        pts.append(tuple(t.initial_config))
        pts.append(tuple(t.terminal_config))
    for rid in domain.team.robot_ids:
        pts.append(tuple(domain.world.robot_start_configs[rid]))
    seen: set[Point] = set()
    uniq = []
    for p in pts:
        if p not in seen:
            seen.add(p)
            uniq.append(p)
    return uniq


def build_roadmap(
    world: WorldModel,
    mandatory: list[Point],
    n_samples: int = 200,
    k_neighbors: int = 8,
    seed: int = 0,
    rejection_cap_factor: int = 50,
) -> Roadmap:
    """Sample free space, force mandatory vertices, connect k nearest.

    Deterministic for a fixed seed. Raises when rejection sampling cannot
    find a single free sample within the cap.
    """
    if n_samples < 1:
        raise RoadmapError("n_samples must be >= 1")
    xmin, ymin, xmax, ymax = world.bounds
    if xmax <= xmin or ymax <= ymin:
        raise RoadmapError("world bounds are degenerate")

    rng = np.random.default_rng(seed)
    free: list[Point] = []
    attempts = 0
    cap = rejection_cap_factor * n_samples
    while len(free) < n_samples and attempts < cap:
        attempts += 1
        p = (float(rng.uniform(xmin, xmax)), float(rng.uniform(ymin, ymax)))
        if not point_in_any(p, world.obstacles):
            free.append(p)
    if not free:
        raise RoadmapError(f"no free sample found in {cap} attempts")

    vertices = list(dict.fromkeys([tuple(p) for p in mandatory] + free))
    pts = np.array(vertices)
    n = len(vertices)
    k = min(k_neighbors, n - 1)

    edges: set[tuple[int, int]] = set()
    lengths: dict[tuple[int, int], float] = {}
    for i in range(n):
        d = np.hypot(pts[:, 0] - pts[i, 0], pts[:, 1] - pts[i, 1])
        d[i] = np.inf
        for j in np.argsort(d, kind="stable")[:k]:
            j = int(j)
            e = (min(i, j), max(i, j))
            if e in edges:
                continue
            if segment_collides(vertices[i], vertices[j], world.obstacles):
                continue
            edges.add(e)
            lengths[e] = float(d[j])

    adjacency: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for (i, j), ln in sorted(lengths.items()):
        adjacency[i].append((j, ln))
        adjacency[j].append((i, ln))
    return Roadmap(
        vertices=tuple(vertices),
        adjacency={i: tuple(v) for i, v in adjacency.items()},
        total_edge_length=float(sum(lengths.values())),
    )


def _dijkstra(roadmap: Roadmap, src: int, dst: int) -> tuple[list[int], float] | None:
    dist = {src: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, src)]
    done: set[int] = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == dst:
            path = [dst]
            while path[-1] != src:
                path.append(prev[path[-1]])
            return path[::-1], d
        for w, ln in roadmap.adjacency.get(v, ()):
            nd = d + ln
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                prev[w] = v
                heapq.heappush(heap, (nd, w))
    return None


def plan(
    roadmap: Roadmap,
    frm: Point,
    to: Point,
    class_id: int,
    speed: float,
    cache: PlanCache | None = None,
) -> MotionPlan | None:
    """Shortest roadmap path as a motion plan; None when disconnected."""
    frm, to = tuple(frm), tuple(to)
    if cache is not None:
        found, cached = cache.lookup(class_id, frm, to)
        if found:
            return cached
    if frm == to:
        result: MotionPlan | None = MotionPlan((frm,), 0.0, 0.0)
    else:
        hit = _dijkstra(roadmap, roadmap.vertex_index(frm), roadmap.vertex_index(to))
        if hit is None:
            result = None
        else:
            path, length = hit
            result = MotionPlan(
                tuple(roadmap.vertices[i] for i in path), length, length / speed
            )
    if cache is not None:
        cache.planner_calls += 1
        cache.store(class_id, frm, to, result)
    return result


def estimate_travel_time(frm: Point, to: Point, speed: float) -> float:
    """Straight-line time; a lower bound on any plan's duration."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    return math.dist(frm, to) / speed


def euclidean_provider(domain: ProblemDomain):
    """Travel times from straight-line distance, ignoring obstacles."""

    speeds = domain.world.robot_speeds

    def travel(robot_id: str, frm: Point, to: Point) -> float:
        return estimate_travel_time(frm, to, speeds[robot_id])

    return travel


def plan_provider(domain: ProblemDomain, roadmap: Roadmap, cache: PlanCache):
    """Travel times from instantiated roadmap plans; inf when disconnected."""

    speeds = domain.world.robot_speeds
    classes = capability_classes(domain.team, domain.world)

    def travel(robot_id: str, frm: Point, to: Point) -> float:
        p = plan(roadmap, frm, to, classes[robot_id], speeds[robot_id], cache)
        return math.inf if p is None else p.duration

    return travel
