"""Frontier extraction, clustering, candidate-goal generation, and the
no-frontier fallback policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from scoutsim import mapping

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class FrontierCluster:
    cells: np.ndarray        # (n, 2) array of (ix, iy)
    centroid: tuple          # world coords
    label: int


def disk_structure(radius_cells):
    r = int(radius_cells)
    if r <= 0:
        return np.ones((1, 1), dtype=bool)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (xx * xx + yy * yy) <= r * r


def inflate_occupied(classes, radius_cells):
    occ = classes == mapping.OCCUPIED
    if radius_cells <= 0:
        return occ
    return ndimage.binary_dilation(occ, structure=disk_structure(radius_cells))


def traversable_mask(grid, robot_radius, extra_cells=1):
    """Cells the planner may enter: free or unknown, outside the inflated
    obstacle region (robot radius plus a safety cell)."""
    classes = grid.classes()
    r_cells = int(math.ceil(robot_radius / grid.resolution)) + extra_cells
    inflated = inflate_occupied(classes, r_cells)
    return (classes != mapping.OCCUPIED) & ~inflated


def reachable_mask(traversable, robot_cell):
    """Connected component of traversable space containing the robot."""
    labels, _ = ndimage.label(traversable, structure=_EIGHT)
    lab = labels[robot_cell[1], robot_cell[0]]
    if lab == 0:
        out = np.zeros_like(traversable)
        out[robot_cell[1], robot_cell[0]] = True
        return out
    return labels == lab


def extract_frontiers(grid, robot_radius, min_cluster_cells=None):
    """Frontier clusters: free cells 8-adjacent to unknown space, clear of
    obstacles by the robot radius, grouped by 8-connectivity.

    Components smaller than min_cluster_cells (default: robot diameter in
    cells) are openings too narrow to traverse and are discarded.
    """
    classes = grid.classes()
    free = classes == mapping.FREE
    unknown = classes == mapping.UNKNOWN
    near_unknown = ndimage.binary_dilation(unknown, structure=_EIGHT)
    r_cells = int(math.ceil(robot_radius / grid.resolution))
    clear = ~inflate_occupied(classes, r_cells)
    frontier = free & near_unknown & clear
    if min_cluster_cells is None:
        min_cluster_cells = int(math.ceil(2.0 * robot_radius / grid.resolution))

    labels, n = ndimage.label(frontier, structure=_EIGHT)
    clusters = []
    for lab in range(1, n + 1):
        ys, xs = np.nonzero(labels == lab)
        if len(xs) < min_cluster_cells:
            continue
        cells = np.column_stack([xs, ys])
        cx = float(np.mean(xs))
        cy = float(np.mean(ys))
        centroid = (grid.origin[0] + (cx + 0.5) * grid.resolution,
                    grid.origin[1] + (cy + 0.5) * grid.resolution)
        clusters.append(FrontierCluster(cells=cells, centroid=centroid, label=lab))
    return clusters


def candidate_goals(clusters, grid, robot_cell, previous_goal=None, *,
                    robot_radius, goal_merge_radius_cells=2):
    """One goal cell per cluster: the centroid when reachable, otherwise the
    nearest reachable cluster member (ring search outward from the
    centroid). Candidates matching the previous iteration's goal are
    dropped (it is assumed unreachable)."""
    trav = traversable_mask(grid, robot_radius)
    reach = reachable_mask(trav, robot_cell)
    res = grid.resolution
    goals = []
    for cl in clusters:
        cix, ciy = grid.world_to_cell(*cl.centroid)
        goal_cell = None
        if grid.in_bounds(cix, ciy) and reach[ciy, cix]:
            goal_cell = (cix, ciy)
        else:
            d2 = (cl.cells[:, 0] - cix) ** 2 + (cl.cells[:, 1] - ciy) ** 2
            for i in np.argsort(d2, kind="stable"):
                x, y = int(cl.cells[i, 0]), int(cl.cells[i, 1])
                if reach[y, x]:
                    goal_cell = (x, y)
                    break
        if goal_cell is None:
            continue
        if previous_goal is not None:
            pgx, pgy = grid.world_to_cell(*previous_goal)
            if (abs(goal_cell[0] - pgx) <= goal_merge_radius_cells
                    and abs(goal_cell[1] - pgy) <= goal_merge_radius_cells):
                continue
        goals.append(grid.cell_center(*goal_cell))
    return goals


ROTATE_IN_PLACE = "rotate_in_place_360"
GOTO_GRAPH_NODE = "goto_graph_node"


def fallback_action(graph_nodes, rng):
    """No frontiers left: either a full in-place rotation (empty graph) or
    a uniformly random previously-visited node."""
    if not graph_nodes:
        return ROTATE_IN_PLACE, None
    i = int(rng.integers(len(graph_nodes)))
    return GOTO_GRAPH_NODE, i
