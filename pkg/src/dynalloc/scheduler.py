"""Exact makespan minimization under precedence, mutex, and travel times.

The core is a simple temporal network: earliest start times are the
longest-path distances over the difference-constraint graph, and a fixed
set of mutex orderings is infeasible exactly when that graph has a
positive cycle. The full problem (free mutex directions) is solved by
branch-and-bound over the orderings; the bound at a partial assignment is
the relaxation that drops every undecided mutex pair, which can only
shorten the makespan, so pruning is safe and the optimum is exact.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .domain import Allocation, ProblemDomain, WorldModel

FEAS_TOL = 1e-9

Pair = tuple[int, int]

# travel(robot_id, from_point, to_point) -> seconds (may be math.inf)
TravelTimeProvider = object  # callable; kept loose, see motion.py providers


@dataclass(frozen=True)
class SchedulingProblem:
    durations: tuple[float, ...]
    precedence: frozenset[Pair]
    mutex_reduced: frozenset[Pair]  # stored with i < j
    transition_times: dict[Pair, float]  # ordered (i, j) -> seconds
    initial_arrivals: dict[int, float]  # task -> earliest physical arrival

    def __post_init__(self):
        for i, j in self.mutex_reduced:
            if (i, j) in self.precedence or (j, i) in self.precedence:
                raise ValueError(f"mutex pair ({i},{j}) also ordered by precedence")

    def key(self):
        """Hashable identity for schedule memoization."""
        return (
            self.durations,
            self.precedence,
            self.mutex_reduced,
            tuple(sorted(self.transition_times.items())),
            tuple(sorted(self.initial_arrivals.items())),
        )

    def transition(self, i: int, j: int) -> float:
        return self.transition_times.get((i, j), 0.0)


@dataclass(frozen=True)
class Schedule:
    start_times: tuple[float, ...]
    makespan: float
    fixed_orderings: dict[Pair, Pair]  # mutex pair (i<j) -> chosen ordered pair


INFEASIBLE = None  # sentinel return for unschedulable instances


class _Compiled:
    """Per-solve working form: arrival floors, base edges, ordering edges.

    Relaxations warm-start from a known subsolution: start times are the
    least fixpoint of the difference constraints, so iterating from any
    componentwise-smaller vector converges to it, and a parent node's
    starts are always componentwise below any child's.
    """

    __slots__ = ("n", "durations", "arrivals", "out", "dir_edge", "finite")

    def __init__(self, problem: SchedulingProblem):
        self.n = len(problem.durations)
        self.durations = problem.durations
        self.arrivals = [problem.initial_arrivals.get(i, 0.0) for i in range(self.n)]
        self.out: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for i, j in sorted(problem.precedence):
            self.out[i].append((j, problem.durations[i] + problem.transition(i, j)))
        self.dir_edge = {}
        for i, j in problem.mutex_reduced:
            self.dir_edge[(i, j)] = (i, j, problem.durations[i] + problem.transition(i, j))
            self.dir_edge[(j, i)] = (j, i, problem.durations[j] + problem.transition(j, i))
        self.finite = all(
            math.isfinite(v) for v in problem.transition_times.values()
        ) and all(math.isfinite(v) for v in problem.initial_arrivals.values())

    def add_edge(self, edge) -> None:
        i, j, w = edge
        self.out[i].append((j, w))

    def pop_edge(self, edge) -> None:
        i, j, w = edge
        assert self.out[i].pop() == (j, w)

    def relax(self, s0, seeds, mk0: float, extra=None):
        """Least fixpoint at or above s0 and its makespan; None on a positive cycle.

        Worklist propagation: only vertices reachable from ``seeds`` (plus
        the optional one-off ``extra`` edge) are touched, so a warm start
        from an already-consistent vector costs only the affected region.
        ``mk0`` must be the makespan of s0; it is raised incrementally as
        starts grow. A vertex dequeued more than n times witnesses a
        positive cycle.
        """
        n = self.n
        s = list(s0)
        d = self.durations
        mk = mk0
        out = self.out
        inq = bytearray(n)
        counts = [0] * n
        queue = deque(seeds)
        for u in seeds:
            inq[u] = 1
        while queue:
            u = queue.popleft()
            inq[u] = 0
            counts[u] += 1
            if counts[u] > n:
                return None
            su = s[u]
            for v, w in out[u]:
                nv = su + w
                if nv > s[v] + FEAS_TOL:
                    s[v] = nv
                    if nv + d[v] > mk:
                        mk = nv + d[v]
                    if not inq[v]:
                        inq[v] = 1
                        queue.append(v)
            if extra is not None and extra[0] == u:
                _, v, w = extra
                nv = su + w
                if nv > s[v] + FEAS_TOL:
                    s[v] = nv
                    if nv + d[v] > mk:
                        mk = nv + d[v]
                    if not inq[v]:
                        inq[v] = 1
                        queue.append(v)
        return s, mk

    def makespan_of(self, s) -> float:
        if self.n == 0:
            return 0.0
        d = self.durations
        return max(s[i] + d[i] for i in range(self.n))


def makespan(start_times, durations) -> float:
    """Completion time of the last task; 0 for no tasks."""
    if len(durations) == 0:
        return 0.0
    return max(s + d for s, d in zip(start_times, durations))


def stn_solve(
    problem: SchedulingProblem, orderings: dict[Pair, Pair]
) -> Schedule | None:
    """Solve with every mutex direction fixed; None when infeasible.

    Returned start times are componentwise minimal among feasible ones.
    """
    comp = _Compiled(problem)
    if not comp.finite:
        return INFEASIBLE
    for i, j in orderings.values():
        comp.add_edge((i, j, problem.durations[i] + problem.transition(i, j)))
    res = comp.relax(comp.arrivals, range(comp.n), comp.makespan_of(comp.arrivals))
    if res is None:
        return INFEASIBLE
    starts, mk = res
    return Schedule(tuple(starts), mk, dict(orderings))


def _sequential_clique_bound(problem: SchedulingProblem) -> float:
    """Static makespan floor from tasks known pairwise non-overlapping.

    Any clique in the graph of precedence plus mutex pairs must run
    sequentially, so its duration sum lower-bounds the makespan. Greedy
    growth from each task; not maximal, but cheap and often tight.
    """
    n = len(problem.durations)
    adj: list[set[int]] = [set() for _ in range(n)]
    for i, j in problem.precedence:
        adj[i].add(j)
        adj[j].add(i)
    for i, j in problem.mutex_reduced:
        adj[i].add(j)
        adj[j].add(i)
    d = problem.durations
    order = sorted(range(n), key=lambda i: -d[i])
    best = max(d, default=0.0)
    for seed in order:
        clique = {seed}
        total = d[seed]
        for cand in order:
            if cand not in clique and clique <= adj[cand]:
                clique.add(cand)
                total += d[cand]
        best = max(best, total)
    return best


def solve_schedule(problem: SchedulingProblem) -> Schedule | None:
    """Exact minimum makespan over all mutex ordering assignments.

    Branch-and-bound: each node fixes a subset of orderings; its bound is
    the STN relaxation ignoring undecided pairs (dropping constraints can
    only shorten the makespan, so pruning against the incumbent is safe).
    Branching picks the undecided pair whose two one-step child bounds
    differ the most (ties broken by pair order), descending into the
    cheaper direction first. A static sequential-clique floor allows early
    exit once the incumbent provably cannot be improved.
    """
    comp = _Compiled(problem)
    if not comp.finite:
        return INFEASIBLE
    pairs = sorted(problem.mutex_reduced)
    root = comp.relax(comp.arrivals, range(comp.n), comp.makespan_of(comp.arrivals))
    if root is None:
        return INFEASIBLE
    root_s, root_mk = root
    if not pairs:
        return Schedule(tuple(root_s), root_mk, {})

    static_lb = _sequential_clique_bound(problem)
    best_mk = math.inf
    best: Schedule | None = None
    dir_edge = comp.dir_edge

    # Lookahead table: pair -> (makespan if forward, makespan if reverse),
    # computed from the starts of the node where the entry was made. Starts
    # only grow as orderings are fixed, so every entry stays a valid lower
    # bound in the whole subtree; forcing and pruning against stale entries
    # is sound. Each node refreshes only the most promising few candidates
    # exactly (by stale gap), branching on the largest exact gap, so the
    # per-node cost stays O(pairs) scalar work plus a handful of
    # incremental relaxations.
    refresh_width = 8

    def recurse(s_cur, mk_cur: float, undecided, la, orderings) -> None:
        nonlocal best, best_mk
        forced: list = []  # edges committed by unit propagation, undone on exit

        def force(p, edge, res) -> bool:
            """Commit a single direction; False when it cannot improve."""
            nonlocal s_cur, mk_cur, undecided, orderings
            if res is None or res[1] >= best_mk - FEAS_TOL:
                return False
            comp.add_edge(edge)
            forced.append(edge)
            orderings = {**orderings, p: (edge[0], edge[1])}
            s_cur, mk_cur = res
            undecided = [q for q in undecided if q != p]
            return True

        try:
            while True:
                if best_mk <= static_lb + FEAS_TOL or mk_cur >= best_mk - FEAS_TOL:
                    return
                if not undecided:
                    best_mk = mk_cur
                    best = Schedule(tuple(s_cur), mk_cur, dict(orderings))
                    return
                node_lb = mk_cur
                forced_now = False
                scored = []
                for p in undecided:
                    mk_f, mk_r = la[p]
                    f_dead = mk_f >= best_mk - FEAS_TOL
                    r_dead = mk_r >= best_mk - FEAS_TOL
                    if f_dead and r_dead:
                        return  # no completion of this node can improve
                    if f_dead or r_dead:
                        edge = dir_edge[(p[1], p[0])] if f_dead else dir_edge[p]
                        res = comp.relax(s_cur, (edge[0],), mk_cur, extra=edge)
                        if not force(p, edge, res):
                            return
                        forced_now = True
                        break
                    low = mk_f if mk_f < mk_r else mk_r
                    if low > node_lb:
                        node_lb = low
                    scored.append((abs(mk_f - mk_r), p))
                if forced_now:
                    continue
                if node_lb >= best_mk - FEAS_TOL:
                    return  # every completion must decide some pair at >= node_lb
                # refresh the widest-gap candidates exactly
                scored.sort(reverse=True)
                la = dict(la)
                best_pair = None
                best_gap = -1.0
                best_children = None
                for _, p in scored[:refresh_width]:
                    fwd_e = dir_edge[p]
                    rev_e = dir_edge[(p[1], p[0])]
                    res_f = comp.relax(s_cur, (fwd_e[0],), mk_cur, extra=fwd_e)
                    res_r = comp.relax(s_cur, (rev_e[0],), mk_cur, extra=rev_e)
                    mk_f = math.inf if res_f is None else res_f[1]
                    mk_r = math.inf if res_r is None else res_r[1]
                    la[p] = (mk_f, mk_r)
                    f_dead = mk_f >= best_mk - FEAS_TOL
                    r_dead = mk_r >= best_mk - FEAS_TOL
                    if f_dead and r_dead:
                        return
                    if f_dead or r_dead:
                        res, edge = (res_r, rev_e) if f_dead else (res_f, fwd_e)
                        if not force(p, edge, res):
                            return
                        forced_now = True
                        break
                    low = mk_f if mk_f < mk_r else mk_r
                    if low > node_lb:
                        node_lb = low
                    gap = abs(mk_f - mk_r)
                    if gap > best_gap:
                        best_gap = gap
                        best_pair = p
                        best_children = ((mk_f, fwd_e, res_f), (mk_r, rev_e, res_r))
                if forced_now:
                    continue
                if node_lb >= best_mk - FEAS_TOL:
                    return
                break
            assert best_pair is not None and best_children is not None
            rest = [q for q in undecided if q != best_pair]
            for mk, edge, res in sorted(best_children, key=lambda c: c[0]):
                if mk >= best_mk - FEAS_TOL:
                    continue
                comp.add_edge(edge)
                recurse(
                    res[0], mk, rest, la,
                    {**orderings, best_pair: (edge[0], edge[1])},
                )
                comp.pop_edge(edge)
                if best_mk <= static_lb + FEAS_TOL:
                    return  # incumbent meets the static floor: provably optimal
        finally:
            for edge in reversed(forced):
                comp.pop_edge(edge)

    root_la = {}
    for p in pairs:
        fwd_e = dir_edge[p]
        rev_e = dir_edge[(p[1], p[0])]
        res_f = comp.relax(root_s, (fwd_e[0],), root_mk, extra=fwd_e)
        res_r = comp.relax(root_s, (rev_e[0],), root_mk, extra=rev_e)
        root_la[p] = (
            math.inf if res_f is None else res_f[1],
            math.inf if res_r is None else res_r[1],
        )
    recurse(root_s, root_mk, pairs, root_la, {})
    return best


def schedule_lower_bound(durations) -> float:
    """Longest single task duration; no schedule can beat it."""
    return max(durations, default=0.0)


def schedule_upper_bound(
    world: WorldModel, durations, roadmap_total_edge_length: float | None = None
) -> float:
    """Worst-case makespan: total ordering with maximal travel.

    ``z`` is the longest possible path length: the roadmap's total edge
    length once one exists, else a perimeter-scaled fallback of
    2*(width+height)*M. The travel term charges every task two worst-case
    trips at the slowest robot's speed.
    """
    m = len(durations)
    if m == 0:
        return 0.0
    if not world.robot_speeds:
        raise ValueError("upper bound needs at least one robot speed")
    w = min(world.robot_speeds.values())
    if w <= 0:
        raise ValueError("robot speeds must be positive")
    if roadmap_total_edge_length is not None:
        z = roadmap_total_edge_length
    else:
        xmin, ymin, xmax, ymax = world.bounds
        z = 2.0 * ((xmax - xmin) + (ymax - ymin)) * m
    return 2.0 * m * z / w + float(sum(durations))


def _transitive_closure(n: int, edges: frozenset[Pair]) -> set[Pair]:
    succ: list[set[int]] = [set() for _ in range(n)]
    for i, j in edges:
        succ[i].add(j)
    closure: set[Pair] = set()
    for start in range(n):
        stack = list(succ[start])
        seen: set[int] = set()
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            closure.add((start, v))
            stack.extend(succ[v])
    return closure


def build_scheduling_problem(
    domain: ProblemDomain, alloc: Allocation, travel
) -> SchedulingProblem:
    """Assemble durations, ordering constraints, and travel times.

    Shared-robot task pairs become induced mutexes (single-task robots);
    pairs already ordered by the transitive precedence closure are dropped.
    Transition and arrival times take the max over the relevant robots, so
    the slowest member of a coalition gates the coalition.
    """
    net = domain.network
    n_tasks = net.n_tasks
    a = alloc.entries
    robots_of = [set(np.flatnonzero(a[m]).tolist()) for m in range(n_tasks)]

    closure = _transitive_closure(n_tasks, net.precedence_edges)
    induced: set[Pair] = set()
    for i in range(n_tasks):
        for j in range(i + 1, n_tasks):
            if robots_of[i] & robots_of[j]:
                induced.add((i, j))
    mutex_all = set(net.mutex_edges) | induced
    mutex_reduced = frozenset(
        (i, j) for i, j in mutex_all if (i, j) not in closure and (j, i) not in closure
    )

    ids = domain.team.robot_ids
    starts = domain.world.robot_start_configs

    def shared_transition(i: int, j: int) -> float:
        shared = robots_of[i] & robots_of[j]
        if not shared:
            return 0.0
        return max(
            travel(ids[r], net.tasks[i].terminal_config, net.tasks[j].initial_config)
            for r in shared
        )

    transition_times: dict[Pair, float] = {}
    for i, j in net.precedence_edges:
        transition_times[(i, j)] = shared_transition(i, j)
    for i, j in mutex_reduced:
        transition_times[(i, j)] = shared_transition(i, j)
        transition_times[(j, i)] = shared_transition(j, i)

    initial_arrivals: dict[int, float] = {}
    for m in range(n_tasks):
        if robots_of[m]:
            initial_arrivals[m] = max(
                travel(ids[r], starts[ids[r]], net.tasks[m].initial_config)
                for r in robots_of[m]
            )
        else:
            initial_arrivals[m] = 0.0

    return SchedulingProblem(
        durations=tuple(t.duration for t in net.tasks),
        precedence=frozenset(net.precedence_edges),
        mutex_reduced=mutex_reduced,
        transition_times=transition_times,
        initial_arrivals=initial_arrivals,
    )
