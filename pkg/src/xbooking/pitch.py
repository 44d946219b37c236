"""Pitch constants and goal geometry in StatsBomb coordinates.

All functions expect points in the attacking frame, i.e. the goal being
attacked sits at x = 120.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class PitchSpec:
    length: float = 120.0
    width: float = 80.0
    goal_center: Point = Point(120.0, 40.0)
    post_low: Point = Point(120.0, 36.0)
    post_high: Point = Point(120.0, 44.0)

    @property
    def goal_width(self) -> float:
        return self.post_high.y - self.post_low.y


PITCH = PitchSpec()

ANGLE_MODES = ("subtended", "bearing")


def in_bounds(p) -> bool:
    x, y = p
    return 0.0 <= x <= PITCH.length and 0.0 <= y <= PITCH.width


def clip(p) -> Point:
    x, y = p
    return Point(min(max(float(x), 0.0), PITCH.length), min(max(float(y), 0.0), PITCH.width))


def mirror(p) -> Point:
    """Flip a location into the opposing team's frame."""
    x, y = p
    return Point(PITCH.length - x, PITCH.width - y)


def distance_to_goal(p) -> float:
    x, y = p
    return math.hypot(PITCH.goal_center.x - x, PITCH.goal_center.y - y)


def angle_to_goal(p, mode: str = "subtended") -> float:
    """Angle in radians from ``p`` to the attacked goal.

    ``subtended`` is the opening angle between the two posts as seen from
    ``p``; a point on the goal line between the posts returns pi.
    ``bearing`` is the absolute angle between the ray to the goal centre
    and the x-axis.
    """
    x, y = p
    if mode == "subtended":
        if x >= PITCH.post_low.x and PITCH.post_low.y <= y <= PITCH.post_high.y:
            return math.pi
        ax, ay = PITCH.post_low.x - x, PITCH.post_low.y - y
        bx, by = PITCH.post_high.x - x, PITCH.post_high.y - y
        return math.atan2(abs(ax * by - ay * bx), ax * bx + ay * by)
    if mode == "bearing":
        return math.atan2(abs(PITCH.goal_center.y - y), abs(PITCH.goal_center.x - x))
    raise ValueError(f"unknown angle mode {mode!r}; expected one of {ANGLE_MODES}")
