"""Information-gain utilities: visibility raycasting, the three cell-utility
formulations, optimal-heading search with frustum-overlap exclusion, and
path-utility aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scoutsim import kernels, mapping
from scoutsim.geom import wrap_angle

U1 = "u1"
U2 = "u2"
U3 = "u3"

WEIGHTED_AVERAGE = "weighted_average"
WEIGHTED_SUM = "weighted_sum"
GOAL_ONLY = "goal_only"
INTERPOLATED = "interpolated"


@dataclass
class UtilityMode:
    variant: str = U1
    kappa1: float = 1.0
    p_thr: float = 0.7
    d_l: float = 0.2
    d_h: float = 0.8

    def __post_init__(self):
        if self.variant not in (U1, U2, U3):
            raise ValueError(f"unknown utility variant {self.variant!r}")
        if not (0.0 < self.d_l < self.d_h < 1.0):
            raise ValueError("need 0 < d_l < d_h < 1")


@dataclass
class AggregationMode:
    kind: str = WEIGHTED_AVERAGE
    rho: float = 0.25

    def __post_init__(self):
        if self.kind not in (WEIGHTED_AVERAGE, WEIGHTED_SUM, GOAL_ONLY, INTERPOLATED):
            raise ValueError(f"unknown aggregation {self.kind!r}")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")


@dataclass
class DiscView:
    """Heading-independent visibility of the disc around one position:
    one raycast serves every candidate heading at that waypoint."""
    idx: np.ndarray       # flat cell indices, visible only
    bearing: np.ndarray
    dist: np.ndarray


def disc_view(grid, position, d_thr):
    idx, bearing, dist = kernels.disc_visibility(
        grid.blocking_mask(),
        position[0] - grid.origin[0], position[1] - grid.origin[1],
        d_thr, grid.resolution)
    return DiscView(idx=idx, bearing=bearing, dist=dist)


def _wedge_mask(bearings, heading, fov):
    d = np.arctan2(np.sin(bearings - heading), np.cos(bearings - heading))
    return np.abs(d) <= 0.5 * fov


def visible_cells(grid, pose, fov, d_thr, excluded=None, view=None):
    """Flat indices of cells visible from (x, y, theta): inside the FOV
    wedge, within d_thr, ray-unoccluded (only cells with p above the
    obstacle threshold occlude; unknown space is transparent), minus the
    excluded set."""
    if view is None:
        view = disc_view(grid, pose[:2], d_thr)
    keep = _wedge_mask(view.bearing, pose[2], fov)
    idx = view.idx[keep]
    if excluded is not None and len(excluded):
        if isinstance(excluded, np.ndarray) and excluded.dtype == bool:
            idx = idx[~excluded[idx]]
        else:
            idx = idx[~np.isin(idx, np.fromiter(excluded, dtype=np.int64))]
    return idx


def cell_utility_values(grid, idx, mode: UtilityMode, query_pose=None, goal_pose=None):
    """Vectorized per-cell utility over flat indices."""
    p = 1.0 / (1.0 + np.exp(-grid.logodds.reshape(-1)[idx]))
    entropy = mapping.entropy_array(p)
    obstacle = (p >= mode.p_thr).astype(np.float64)
    if mode.variant == U1:
        return entropy
    if mode.variant == U2:
        return entropy + mode.kappa1 * obstacle
    if goal_pose is None:
        raise ValueError("u3 requires a goal pose")
    if query_pose is None:
        raise ValueError("u3 requires the query pose")
    j = goal_distance_weight(query_pose, goal_pose, mode.d_l, mode.d_h)
    unknown = grid.touched.reshape(-1)[idx] == 0
    lam = np.where(unknown, 1.0 - j, j)
    return lam * entropy + mode.kappa1 * obstacle


def goal_distance_weight(query_pose, goal_pose, d_l=0.2, d_h=0.8):
    """j = max(d_l, min(d_h, d_l * ||x - x_G||)); always within [d_l, d_h]."""
    dist = math.hypot(query_pose[0] - goal_pose[0], query_pose[1] - goal_pose[1])
    return max(d_l, min(d_h, d_l * dist))


def cell_utility(grid, cell, mode: UtilityMode, query_pose=None, goal_pose=None):
    """Scalar utility of one (ix, iy) cell."""
    ix, iy = cell
    idx = np.array([iy * grid.width + ix], dtype=np.int64)
    return float(cell_utility_values(grid, idx, mode, query_pose, goal_pose)[0])


def pose_utility(grid, pose, fov, d_thr, mode: UtilityMode, goal_pose=None,
                 excluded=None, view=None):
    idx = visible_cells(grid, pose, fov, d_thr, excluded, view)
    if idx.size == 0:
        return 0.0
    return float(np.sum(cell_utility_values(grid, idx, mode, pose, goal_pose)))


def optimal_heading(grid, position, fov, d_thr, mode: UtilityMode, *,
                    n_headings=16, goal_pose=None, excluded=None, view=None):
    """Exhaustive argmax of pose utility over n_headings uniformly spaced
    headings in [0, 2pi); ties go to the smallest heading index.

    Returns (theta, covered flat indices for that heading, utility).
    """
    if view is None:
        view = disc_view(grid, position, d_thr)
    idx = view.idx
    bearing = view.bearing
    if excluded is not None and len(excluded):
        if isinstance(excluded, np.ndarray) and excluded.dtype == bool:
            keep = ~excluded[idx]
        else:
            keep = ~np.isin(idx, np.fromiter(excluded, dtype=np.int64))
        idx = idx[keep]
        bearing = bearing[keep]

    best_u = -1.0
    best_i = 0
    best_cover = np.empty(0, dtype=np.int64)
    if idx.size:
        values_cache = None
        for i in range(n_headings):
            theta = 2.0 * math.pi * i / n_headings
            wedge = _wedge_mask(bearing, theta, fov)
            sub = idx[wedge]
            if sub.size == 0:
                u = 0.0
            else:
                if values_cache is None:
                    # per-cell utilities depend on the position, not the heading
                    query = (position[0], position[1], 0.0)
                    values_cache = cell_utility_values(grid, idx, mode, query, goal_pose)
                u = float(np.sum(values_cache[wedge]))
            if u > best_u:
                best_u = u
                best_i = i
                best_cover = sub
    if best_u < 0.0:
        best_u = 0.0
    theta = wrap_angle(2.0 * math.pi * best_i / n_headings)
    return theta, best_cover, best_u


def path_utility(utilities, distances, aggregation: AggregationMode):
    """Aggregate per-waypoint utilities along a path.

    weighted_average / weighted_sum use k_i = exp(-rho * d_i) with d_i
    the cumulative path distance from the robot; goal_only keeps the
    final waypoint's utility; interpolated is a plain sum.
    """
    utilities = np.asarray(utilities, dtype=np.float64)
    distances = np.asarray(distances, dtype=np.float64)
    if utilities.size == 0:
        raise ValueError("empty waypoint list")
    if aggregation.kind == GOAL_ONLY:
        return float(utilities[-1])
    if aggregation.kind == INTERPOLATED:
        return float(np.sum(utilities))
    k = np.exp(-aggregation.rho * distances)
    if aggregation.kind == WEIGHTED_SUM:
        return float(np.sum(k * utilities))
    return float(np.sum(k * utilities) / np.sum(k))
