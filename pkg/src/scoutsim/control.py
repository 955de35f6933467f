"""Receding-horizon NMPC path execution, obstacle selection, second-level
waypoint-heading refinement, and third-level feature-aware heading blending."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from scoutsim import kernels, utility
from scoutsim.geom import wrap_angle

RECOVERY = "RECOVERY"


@dataclass
class NmpcConfig:
    horizon: int = 20
    dt: float = 0.1
    q_pos: float = 5.0
    q_heading: float = 2.0
    r_effort: float = 0.5
    q_obs: float = 1.0
    u_max: tuple = (1.0, 1.0, 1.0)
    v_tr_max: float = 1.0
    d_min: float = 0.25
    max_obstacles: int = 10
    iters: int = 30
    clearance_penalty: float = 200.0

    @classmethod
    def from_params(cls, p):
        return cls(horizon=p.horizon, dt=p.control_dt, q_pos=p.q_pos,
                   q_heading=p.q_heading, r_effort=p.r_effort, q_obs=p.q_obs,
                   u_max=p.u_max, v_tr_max=p.v_tr_max, d_min=p.d_min,
                   max_obstacles=p.max_obstacles, iters=p.nmpc_iters,
                   clearance_penalty=p.clearance_penalty)


@dataclass
class ObstacleTrack:
    position: tuple                      # representative vertex, world coords
    dynamic: bool = False
    predicted: np.ndarray | None = None  # (N, 2) predicted positions

    def horizon_positions(self, n):
        if self.predicted is not None:
            if self.predicted.shape[0] != n:
                raise ValueError("prediction length must equal the horizon")
            return self.predicted
        return np.tile(np.asarray(self.position, dtype=np.float64), (n, 1))


def obstacle_selection(tracks, predicted_states, max_obstacles=10):
    """Priority: dynamic tracks first, then the nearest static ones with
    respect to the previously predicted robot states; truncate to the
    obstacle budget. Equal distances keep input order."""
    if not tracks:
        return []
    if predicted_states is None or len(predicted_states) == 0:
        ref = None
    else:
        ref = np.asarray(predicted_states, dtype=np.float64)[:, :2]

    def distance(tr):
        p = np.asarray(tr.position, dtype=np.float64)
        if ref is None:
            return float(np.hypot(p[0], p[1]))
        return float(np.min(np.hypot(ref[:, 0] - p[0], ref[:, 1] - p[1])))

    order = sorted(range(len(tracks)),
                   key=lambda i: (0 if tracks[i].dynamic else 1, distance(tracks[i])))
    return [tracks[i] for i in order[:max_obstacles]]


def detect_grid_obstacles(grid, position, radius=2.0, suppress=0.3,
                          per_component=6):
    """Obstacle tracks from the estimated map: each connected occupied
    component near the robot is represented by up to `per_component`
    cell-center points, picked nearest-first with a minimum separation
    of `suppress` meters, so walls and corners are covered by several
    vertices rather than the single closest one."""
    from scoutsim import mapping
    ix, iy = grid.world_to_cell(position[0], position[1])
    r = int(math.ceil(radius / grid.resolution))
    x0, x1 = max(0, ix - r), min(grid.width, ix + r + 1)
    y0, y1 = max(0, iy - r), min(grid.height, iy + r + 1)
    occ = grid.classes()[y0:y1, x0:x1] == mapping.OCCUPIED
    if not occ.any():
        return []
    labels, n = ndimage.label(occ, structure=np.ones((3, 3), dtype=bool))
    tracks = []
    for lab in range(1, n + 1):
        ys, xs = np.nonzero(labels == lab)
        cx = grid.origin[0] + (xs + x0 + 0.5) * grid.resolution
        cy = grid.origin[1] + (ys + y0 + 0.5) * grid.resolution
        d = np.hypot(cx - position[0], cy - position[1])
        order = np.argsort(d, kind="stable")
        chosen = []
        for k in order:
            if d[k] > radius:
                break
            if any((cx[k] - px) ** 2 + (cy[k] - py) ** 2 < suppress * suppress
                   for px, py in chosen):
                continue
            chosen.append((float(cx[k]), float(cy[k])))
            if len(chosen) >= per_component:
                break
        for pt in chosen:
            tracks.append(ObstacleTrack(position=pt))
    return tracks


class NmpcController:
    """Single-shooting receding-horizon controller.

    Projected-gradient descent with an analytic adjoint gradient, warm
    started by shifting the previous solution one step. Box and
    translational-norm bounds are enforced by projection, so every
    emitted control is feasible exactly; the clearance constraint is a
    hard pre-check at the current state (violation signals RECOVERY)
    plus an escalating soft penalty over the horizon.
    """

    def __init__(self, config: NmpcConfig):
        self.cfg = config
        self._qx = np.array([config.q_pos, config.q_pos, config.q_heading])
        self._r = np.full(3, config.r_effort)
        self._umax_arr = np.asarray(config.u_max, dtype=np.float64)
        self.warm = np.zeros((config.horizon, 3))
        self.predicted_states = None

    def reset(self):
        self.warm = np.zeros((self.cfg.horizon, 3))
        self.predicted_states = None

    def _project(self, U):
        np.clip(U, -self._umax_arr, self._umax_arr, out=U)
        norm = np.hypot(U[:, 0], U[:, 1])
        over = norm > self.cfg.v_tr_max
        if np.any(over):
            scale = self.cfg.v_tr_max / norm[over]
            U[over, 0] *= scale
            U[over, 1] *= scale
        return U

    def _rollout_states(self, state, U):
        cfg = self.cfg
        out = np.empty((cfg.horizon + 1, 3))
        x, y, th = state
        out[0] = (x, y, th)
        for n in range(cfg.horizon):
            ux, uy, ut = U[n]
            tm = th + 0.5 * cfg.dt * ut
            c, s = math.cos(tm), math.sin(tm)
            x += cfg.dt * (ux * c - uy * s)
            y += cfg.dt * (ux * s + uy * c)
            th += cfg.dt * ut
            out[n + 1] = (x, y, th)
        return out

    def solve(self, state, target, obstacles=()):
        """One control step: returns (u, info) or (RECOVERY, info) when the
        clearance constraint is already violated at the current state."""
        cfg = self.cfg
        state = np.asarray(state, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        K = len(obstacles)
        if K:
            obs = np.stack([tr.horizon_positions(cfg.horizon) for tr in obstacles])
            d0 = np.min(np.hypot(obs[:, 0, 0] - state[0], obs[:, 0, 1] - state[1]))
            if d0 < cfg.d_min:
                return RECOVERY, {"min_clearance": float(d0)}
        else:
            obs = np.empty((0, cfg.horizon, 2))

        penalty = cfg.clearance_penalty
        U = self.warm.copy()
        U[:-1] = self.warm[1:]
        self._project(U)
        for escalation in range(3):
            U, J = self._descend(state, U, target, obs, penalty)
            if K == 0:
                break
            states = self._rollout_states(state, U)
            dmin = np.inf
            for k in range(K):
                d = np.hypot(states[1:, 0] - obs[k, :, 0],
                             states[1:, 1] - obs[k, :, 1])
                dmin = min(dmin, float(np.min(d)))
            if dmin >= cfg.d_min:
                break
            penalty *= 5.0
        self.warm = U
        self.predicted_states = self._rollout_states(state, U)
        return np.array(U[0]), {"cost": J}

    def _descend(self, state, U, target, obs, penalty):
        cfg = self.cfg
        J, g = kernels.nmpc_eval(state, U, target, self._qx, self._r, cfg.q_obs,
                                 obs, cfg.dt, cfg.d_min, penalty, True)
        alpha = 0.05
        for _ in range(cfg.iters):
            improved = False
            for _ in range(12):
                U_try = self._project(U - alpha * g)
                J_try, _ = kernels.nmpc_eval(state, U_try, target, self._qx,
                                             self._r, cfg.q_obs, obs, cfg.dt,
                                             cfg.d_min, penalty, False)
                if J_try < J:
                    improved = True
                    break
                alpha *= 0.5
            if not improved:
                break
            U = U_try
            prev = J
            J, g = kernels.nmpc_eval(state, U, target, self._qx, self._r,
                                     cfg.q_obs, obs, cfg.dt, cfg.d_min,
                                     penalty, True)
            alpha *= 1.5
            if prev - J < 1e-10:
                break
        return U, J


def refine_next_heading(grid, next_waypoint, mode, goal_pose, covered_so_far,
                        *, fov, d_thr, n_headings=16):
    """Second-level activeness: re-run the optimal-heading search for the
    upcoming waypoint on the current map, excluding only what was
    actually covered so far on this segment."""
    theta, covered, u = utility.optimal_heading(
        grid, (next_waypoint.x, next_waypoint.y), fov, d_thr, mode,
        n_headings=n_headings, goal_pose=goal_pose, excluded=covered_so_far)
    return theta, covered, u


def feature_heading(feature_points, waypoint_xy, current_heading, grid, *,
                    fov, max_range, n_headings=16):
    """Heading that retains the most features in the FOV from the next
    waypoint position; falls back to the current robot heading when no
    feature is visible at all."""
    pts = np.asarray(feature_points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return wrap_angle(current_heading)
    px, py = waypoint_xy
    dx = pts[:, 0] - px
    dy = pts[:, 1] - py
    dist = np.hypot(dx, dy)
    bearings = np.arctan2(dy, dx)
    occ = grid.blocking_mask()
    usable = []
    for i in range(pts.shape[0]):
        if dist[i] > max_range:
            continue
        if kernels.segment_clear(occ, px - grid.origin[0], py - grid.origin[1],
                                 pts[i, 0] - grid.origin[0],
                                 pts[i, 1] - grid.origin[1], grid.resolution):
            usable.append(bearings[i])
    if not usable:
        return wrap_angle(current_heading)
    usable = np.asarray(usable)
    best_count = -1
    best_theta = 0.0
    for i in range(n_headings):
        theta = 2.0 * math.pi * i / n_headings
        d = np.arctan2(np.sin(usable - theta), np.cos(usable - theta))
        count = int(np.sum(np.abs(d) <= 0.5 * fov))
        if count > best_count:
            best_count = count
            best_theta = theta
    return wrap_angle(best_theta)


def blended_heading(theta_star, beta, d_t, kappa2=-6.0, kappa3=-0.5):
    """Third-level blend of the refined waypoint heading with the
    feature-retention heading, weighted by distance to the waypoint.

    Computed on the circle: beta is re-expressed in the angular branch
    within pi of theta_star before the scalar blend. The d_t -> 0 limit
    is theta_star.
    """
    if d_t <= 0.0:
        return wrap_angle(theta_star)
    beta_r = theta_star + wrap_angle(beta - theta_star)
    w1 = math.exp(kappa2 * d_t)
    w2 = math.exp(kappa3 / d_t)
    return wrap_angle((theta_star * w1 + beta_r * w2) / (w1 + w2))
