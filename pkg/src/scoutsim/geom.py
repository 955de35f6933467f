"""Small shared geometry helpers."""

from __future__ import annotations

import math


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def compose(pose, delta):
    """Compose a body-frame delta onto a world-frame pose."""
    x, y, th = pose
    dx, dy, dth = delta
    c = math.cos(th)
    s = math.sin(th)
    return (x + dx * c - dy * s, y + dx * s + dy * c, wrap_angle(th + dth))


def relative(pose_from, pose_to):
    """Body-frame delta taking pose_from to pose_to (inverse of compose)."""
    x0, y0, t0 = pose_from
    x1, y1, t1 = pose_to
    c = math.cos(t0)
    s = math.sin(t0)
    dx = x1 - x0
    dy = y1 - y0
    return (dx * c + dy * s, -dx * s + dy * c, wrap_angle(t1 - t0))
