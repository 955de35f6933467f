"""A* global planning on the estimated grid, waypoint reduction, and
first-level activeness (per-waypoint heading optimization with frustum
overlap chaining, best-goal selection)."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from scoutsim import mapping, utility
from scoutsim.frontier import traversable_mask
from scoutsim.geom import wrap_angle

_SQRT2 = math.sqrt(2.0)
_NEIGHBORS = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
              (1, 1, _SQRT2), (1, -1, _SQRT2), (-1, 1, _SQRT2), (-1, -1, _SQRT2)]


class UnreachableError(RuntimeError):
    """No traversable path between start and goal."""


@dataclass
class Waypoint:
    x: float
    y: float
    theta: float = 0.0
    d: float = 0.0                     # cumulative path distance from the robot
    covered: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def pose(self):
        return (self.x, self.y, self.theta)


@dataclass
class PlannedPath:
    goal: tuple
    waypoints: list
    utility_value: float
    per_waypoint_utility: list


def cost_field(grid, robot_radius, unknown_cost_factor=1.2):
    """Per-cell traversal cost multiplier; inf for blocked cells.

    Unknown cells are traversable at a mild extra cost: frontier goals
    sit next to unknown space, so pure-free planning would make every
    frontier unreachable.
    """
    trav = traversable_mask(grid, robot_radius)
    cost = np.where(grid.classes() == mapping.UNKNOWN, unknown_cost_factor, 1.0)
    cost[~trav] = np.inf
    return cost


def astar(cost, start, goal, resolution):
    """8-connected A* with octile step costs scaled by the cell cost field
    and a Euclidean admissible heuristic. Returns the cell path and its
    traversal cost (in meters, including cost factors)."""
    h, w = cost.shape
    sx, sy = start
    gx, gy = goal
    if not (0 <= sx < w and 0 <= sy < h and 0 <= gx < w and 0 <= gy < h):
        raise UnreachableError("endpoint outside the grid")
    if not np.isfinite(cost[sy, sx]):
        raise UnreachableError("start cell blocked")
    if not np.isfinite(cost[gy, gx]):
        raise UnreachableError("goal cell blocked")
    if start == goal:
        return [start], 0.0

    gscore = np.full((h, w), np.inf)
    gscore[sy, sx] = 0.0
    parent = np.full((h, w), -1, dtype=np.int64)
    closed = np.zeros((h, w), dtype=bool)
    heap = [(resolution * math.hypot(gx - sx, gy - sy), 0.0, sx, sy)]
    while heap:
        _, g, x, y = heapq.heappop(heap)
        if closed[y, x]:
            continue
        closed[y, x] = True
        if (x, y) == goal:
            path = []
            cx, cy = x, y
            while (cx, cy) != start:
                path.append((cx, cy))
                p = parent[cy, cx]
                cx, cy = int(p % w), int(p // w)
            path.append(start)
            path.reverse()
            return path, g
        for dx, dy, step in _NEIGHBORS:
            nx, ny = x + dx, y + dy
            if nx < 0 or nx >= w or ny < 0 or ny >= h or closed[ny, nx]:
                continue
            c = cost[ny, nx]
            if not np.isfinite(c):
                continue
            ng = g + step * resolution * c
            if ng < gscore[ny, nx]:
                gscore[ny, nx] = ng
                parent[ny, nx] = y * w + x
                heapq.heappush(
                    heap, (ng + resolution * math.hypot(gx - nx, gy - ny), ng, nx, ny))
    raise UnreachableError(f"no path from {start} to {goal}")


def open_start_region(cost, grid, start_cell, robot_radius):
    """Make the robot's own footprint traversable in the cost field.

    The robot physically occupies its current position even when
    obstacle inflation covers it; without this, planning from a pose
    near a wall always fails. Actually occupied cells stay blocked."""
    sx, sy = start_cell
    r = int(math.ceil(robot_radius / grid.resolution)) + 1
    classes = grid.classes()
    for iy in range(max(0, sy - r), min(grid.height, sy + r + 1)):
        for ix in range(max(0, sx - r), min(grid.width, sx + r + 1)):
            if (ix - sx) ** 2 + (iy - sy) ** 2 > r * r:
                continue
            if not np.isfinite(cost[iy, ix]) and classes[iy, ix] != mapping.OCCUPIED:
                cost[iy, ix] = 1.0
    return cost


def dijkstra_field(cost, start):
    """Single-source shortest-path field over the whole grid, with the
    same edge weights as `astar` (step x resolution-free cost factor of
    the entered cell; multiply distances by resolution to get meters).

    Returns (dist, pred) flat arrays; pred[i] is the flat predecessor
    index, -9999 where unreached. One field serves every candidate goal
    of a planning round.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra as _dijkstra

    h, w = cost.shape
    n = h * w
    finite = np.isfinite(cost)
    rows = []
    cols = []
    vals = []
    for dx, dy, step in _NEIGHBORS:
        src_x0, src_x1 = max(0, -dx), min(w, w - dx)
        src_y0, src_y1 = max(0, -dy), min(h, h - dy)
        src = (np.arange(src_y0, src_y1)[:, None] * w
               + np.arange(src_x0, src_x1)[None, :])
        dst = src + dy * w + dx
        ok = finite.reshape(-1)[src.reshape(-1)] & finite.reshape(-1)[dst.reshape(-1)]
        s = src.reshape(-1)[ok]
        d = dst.reshape(-1)[ok]
        rows.append(s)
        cols.append(d)
        vals.append(step * cost.reshape(-1)[d])
    graph = coo_matrix((np.concatenate(vals),
                        (np.concatenate(rows), np.concatenate(cols))),
                       shape=(n, n))
    sx, sy = start
    dist, pred = _dijkstra(graph, directed=True, indices=sy * w + sx,
                           return_predecessors=True)
    return dist, pred


def path_from_predecessors(pred, start, goal, width):
    """Cell path start..goal out of a dijkstra_field predecessor array."""
    sx, sy = start
    gx, gy = goal
    node = gy * width + gx
    start_node = sy * width + sx
    path = []
    while node != start_node:
        if node < 0:
            raise UnreachableError(f"no path from {start} to {goal}")
        path.append((int(node % width), int(node // width)))
        node = int(pred[node])
    path.append(start)
    path.reverse()
    return path


def path_polyline(grid, cell_path, robot_pose):
    """World-coordinate polyline: exact robot position, then cell centers."""
    pts = [(robot_pose[0], robot_pose[1])]
    for (ix, iy) in cell_path[1:]:
        pts.append(grid.cell_center(ix, iy))
    return pts


def reduce_to_waypoints(polyline, spacing=1.0):
    """Waypoint positions at arc-length multiples of `spacing` along the
    polyline; first point is the robot position, last is the goal.
    Returns a list of (x, y, cumulative_distance)."""
    if not polyline:
        raise ValueError("empty path")
    out = [(polyline[0][0], polyline[0][1], 0.0)]
    next_d = spacing
    d = 0.0
    for i in range(1, len(polyline)):
        x0, y0 = polyline[i - 1]
        x1, y1 = polyline[i]
        seg = math.hypot(x1 - x0, y1 - y0)
        while seg > 1e-12 and d + seg >= next_d - 1e-12:
            t = (next_d - d) / seg
            out.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0), next_d))
            next_d += spacing
        d += seg
    last = polyline[-1]
    if d - out[-1][2] > 1e-9 or len(out) == 1:
        out.append((last[0], last[1], d))
    else:
        out[-1] = (last[0], last[1], d)
    return out


def tangent_headings(points):
    """Movement-direction heading per waypoint; the last keeps the previous
    tangent."""
    n = len(points)
    out = []
    for i in range(n):
        if i < n - 1:
            dx = points[i + 1][0] - points[i][0]
            dy = points[i + 1][1] - points[i][1]
        else:
            dx = points[i][0] - points[i - 1][0] if n > 1 else 1.0
            dy = points[i][1] - points[i - 1][1] if n > 1 else 0.0
        if abs(dx) < 1e-12 and abs(dy) < 1e-12:
            out.append(out[-1] if out else 0.0)
        else:
            out.append(math.atan2(dy, dx))
    return out


def build_waypoints(grid, robot_pose, goal, method, params, cost=None, field=None):
    """Shortest path to the goal, waypoint reduction, and heading
    assignment for one candidate. Returns (waypoints, per-waypoint
    utilities, aggregate). `field` is an optional precomputed
    dijkstra_field result shared across candidates."""
    start = grid.world_to_cell(robot_pose[0], robot_pose[1])
    if cost is None:
        cost = cost_field(grid, params.robot_radius, params.unknown_cost_factor)
        open_start_region(cost, grid, start, params.robot_radius)
    goal_cell = grid.world_to_cell(goal[0], goal[1])
    if field is not None:
        dist, pred = field
        flat_goal = goal_cell[1] * grid.width + goal_cell[0]
        if not np.isfinite(dist[flat_goal]):
            raise UnreachableError(f"no path from {start} to {goal_cell}")
        cell_path = path_from_predecessors(pred, start, goal_cell, grid.width)
    else:
        cell_path, _ = astar(cost, start, goal_cell, grid.resolution)
    pts = reduce_to_waypoints(path_polyline(grid, cell_path, robot_pose),
                              params.waypoint_spacing)

    mode = method.utility_mode(params)
    agg = method.aggregation_mode(params)
    goal_pose = (goal[0], goal[1], 0.0)
    fov = params.fov
    d_thr = params.max_range
    tangents = tangent_headings(pts)

    waypoints = []
    utilities = []
    if agg.kind in (utility.WEIGHTED_AVERAGE, utility.WEIGHTED_SUM):
        # first-level activeness: chained heading optimization with
        # frustum-overlap exclusion
        excluded = np.zeros(grid.width * grid.height, dtype=bool)
        for (x, y, d) in pts:
            theta, covered, u = utility.optimal_heading(
                grid, (x, y), fov, d_thr, mode,
                n_headings=params.n_headings, goal_pose=goal_pose,
                excluded=excluded)
            excluded[covered] = True
            waypoints.append(Waypoint(x, y, theta, d, covered))
            utilities.append(u)
    elif agg.kind == utility.GOAL_ONLY:
        for i, (x, y, d) in enumerate(pts):
            if i == len(pts) - 1:
                theta, covered, u = utility.optimal_heading(
                    grid, (x, y), fov, d_thr, mode,
                    n_headings=params.n_headings, goal_pose=goal_pose)
                waypoints.append(Waypoint(x, y, theta, d, covered))
                utilities.append(u)
            else:
                waypoints.append(Waypoint(x, y, tangents[i], d))
                utilities.append(0.0)
    else:  # interpolated: tangent headings, no overlap exclusion
        for i, (x, y, d) in enumerate(pts):
            pose = (x, y, tangents[i])
            u = utility.pose_utility(grid, pose, fov, d_thr, mode, goal_pose)
            waypoints.append(Waypoint(x, y, tangents[i], d))
            utilities.append(u)

    value = utility.path_utility(utilities, [w.d for w in waypoints], agg)
    return waypoints, utilities, value


def plan_informative_path(grid, robot_pose, candidates, method, params):
    """Evaluate every candidate goal and return the highest-utility path;
    ties break by candidate index. Raises UnreachableError when no
    candidate has a path."""
    if not candidates:
        raise UnreachableError("no candidate goals")
    cost = cost_field(grid, params.robot_radius, params.unknown_cost_factor)
    start = grid.world_to_cell(robot_pose[0], robot_pose[1])
    open_start_region(cost, grid, start, params.robot_radius)
    field = dijkstra_field(cost, start)
    best = None
    for goal in candidates:
        try:
            wps, per_u, value = build_waypoints(
                grid, robot_pose, goal, method, params, cost=cost, field=field)
        except UnreachableError:
            continue
        if best is None or value > best.utility_value:
            best = PlannedPath(goal=goal, waypoints=wps, utility_value=value,
                               per_waypoint_utility=per_u)
    if best is None:
        raise UnreachableError("all candidate goals unreachable")

    if method.level1 and method.aggregation == utility.GOAL_ONLY:
        # OL with first-level activeness: headings along the already
        # selected path are optimized with overlap chaining
        mode = method.utility_mode(params)
        goal_pose = (best.goal[0], best.goal[1], 0.0)
        excluded = np.zeros(grid.width * grid.height, dtype=bool)
        for w in best.waypoints:
            theta, covered, _ = utility.optimal_heading(
                grid, (w.x, w.y), params.fov, params.max_range, mode,
                n_headings=params.n_headings, goal_pose=goal_pose,
                excluded=excluded)
            excluded[covered] = True
            w.theta = theta
            w.covered = covered
    return best
