"""Shared fixtures: tiny hand-built domains and seeded generated ones."""

from __future__ import annotations

import numpy as np
import pytest

from dynalloc.domain import (
    DesiredTraitMatrix,
    ProblemDomain,
    TaskNetwork,
    TaskSpec,
    TeamTraitMatrix,
    WorldModel,
)
from dynalloc.generator import generate_problem
from dynalloc.geometry import Circle


def build_domain(
    team_rows,
    req_rows,
    *,
    durations=None,
    precedence=(),
    mutex=(),
    obstacles=(),
    bounds=(0.0, 0.0, 20.0, 20.0),
    speeds=None,
):
    """Small hand-built domain with evenly spaced task sites and starts."""
    n_robots = len(team_rows)
    n_tasks = len(req_rows)
    n_traits = len(team_rows[0])
    robot_ids = tuple(f"r{i}" for i in range(n_robots))
    durations = durations or [1.0] * n_tasks
    tasks = tuple(
        TaskSpec(
            f"t{m}",
            durations[m],
            (2.0 + 3.0 * m, 5.0),
            (2.0 + 3.0 * m, 8.0),
        )
        for m in range(n_tasks)
    )
    starts = {rid: (1.0 + 2.0 * i, 1.0) for i, rid in enumerate(robot_ids)}
    speeds = speeds or {rid: 1.0 for rid in robot_ids}
    return ProblemDomain(
        iteration=0,
        network=TaskNetwork(tasks, frozenset(precedence), frozenset(mutex)),
        team=TeamTraitMatrix(
            np.array(team_rows, dtype=float),
            robot_ids,
            tuple(f"trait{u}" for u in range(n_traits)),
        ),
        requirements=DesiredTraitMatrix(np.array(req_rows, dtype=float)),
        world=WorldModel(bounds, tuple(obstacles), starts, speeds),
    )


@pytest.fixture
def tiny_domain():
    """One robot, one task, one trait; trivially solvable."""
    return build_domain([[1.0]], [[1.0]])


@pytest.fixture
def pair_domain():
    """Two robots each holding 1 unit of the trait; the task needs 2."""
    return build_domain([[1.0], [1.0]], [[2.0]])


@pytest.fixture
def empty_req_domain():
    """Requirements are all zero, so the empty allocation is a goal."""
    return build_domain([[1.0], [1.0]], [[0.0], [0.0]])


@pytest.fixture
def obstacle_domain():
    """A circle sits between every robot start and every task site."""
    return build_domain(
        [[1.0], [1.0]],
        [[1.0], [1.0]],
        obstacles=[Circle((10.0, 3.5), 2.0)],
        bounds=(0.0, 0.0, 20.0, 20.0),
    )


@pytest.fixture
def desk_domain():
    """Seeded generated domain at brute-force-oracle scale."""
    return generate_problem(0, 3, 4, 3)
