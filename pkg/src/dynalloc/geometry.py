"""2-D geometry: axis-aligned world bounds, obstacle shapes, collision tests.

Points are plain (x, y) tuples so they can key dictionaries (plan cache,
roadmap vertices). Boundary contact counts as collision everywhere: a
segment grazing an obstacle is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float

    def contains(self, p: Point) -> bool:
        return math.dist(p, self.center) <= self.radius


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by min/max corners."""

    min_corner: Point
    max_corner: Point

    def contains(self, p: Point) -> bool:
        return (
            self.min_corner[0] <= p[0] <= self.max_corner[0]
            and self.min_corner[1] <= p[1] <= self.max_corner[1]
        )


Shape = Circle | Rect


def point_in_any(p: Point, obstacles: tuple[Shape, ...]) -> bool:
    return any(ob.contains(p) for ob in obstacles)


def _seg_point_dist(a: Point, b: Point, p: Point) -> float:
    """Distance from point p to segment ab."""
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        return math.dist(a, p)
    t = ((px - ax) * dx + (py - ay) * dy) / den
    t = min(1.0, max(0.0, t))
    return math.dist((ax + t * dx, ay + t * dy), p)


def segment_hits_circle(a: Point, b: Point, c: Circle) -> bool:
    return _seg_point_dist(a, b, c.center) <= c.radius


def segment_hits_rect(a: Point, b: Point, r: Rect) -> bool:
    """Liang-Barsky clip; any overlap (including touching) collides."""
    x0, y0 = a
    x1, y1 = b
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, x0 - r.min_corner[0]),
        (dx, r.max_corner[0] - x0),
        (-dy, y0 - r.min_corner[1]),
        (dy, r.max_corner[1] - y0),
    ):
        if p == 0.0:
            if q < 0.0:
                return False
            continue
        t = q / p
        if p < 0.0:
            if t > t1:
                return False
            t0 = max(t0, t)
        else:
            if t < t0:
                return False
            t1 = min(t1, t)
    return t0 <= t1


def segment_collides(a: Point, b: Point, obstacles: tuple[Shape, ...]) -> bool:
    for ob in obstacles:
        if isinstance(ob, Circle):
            if segment_hits_circle(a, b, ob):
                return True
        else:
            if segment_hits_rect(a, b, ob):
                return True
    return False
