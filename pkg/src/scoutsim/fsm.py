"""Finite state machine coordinating the three activeness levels, the
controller, and recovery. One tick per control step; the trial loop
executes the returned command."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from scoutsim import control, frontier, planner, utility
from scoutsim.geom import wrap_angle

WAITING = "WAITING"
OPERATING = "OPERATING"
GOAL_REACHED = "GOAL_REACHED"
RECOVERY = "RECOVERY"
FAILED = "FAILED"


@dataclass
class TrackCommand:
    """Track the current waypoint with the NMPC."""
    waypoint: planner.Waypoint


@dataclass
class VelocityCommand:
    """Direct body-frame velocity (in-place rotation, recovery motions)."""
    u: tuple


@dataclass
class IdleCommand:
    pass


class ExplorationFsm:
    def __init__(self, method, params, rng, event_sink=None):
        self.method = method
        self.params = params
        self.rng = rng
        self.status = WAITING
        self.queue: list[planner.Waypoint] = []
        self.current: planner.Waypoint | None = None
        self.goal = None
        self.escalation = 0
        self.events: list[dict] = []
        self._event_sink = event_sink
        self._covered = None          # frustum cells covered on the active path
        self._rotate_remaining = 0.0
        # recovery bookkeeping
        self._rec_phase = None        # "rotate" | "translate"
        self._rec_remaining = 0.0
        self._rec_dir = (0.0, 0.0)
        self._rec_anchor = None       # (t, pose) at recovery start
        self._rec_hard_done = False

    # -- events ------------------------------------------------------

    def log(self, t, event, **extra):
        rec = {"t": round(float(t), 3), "event": event, **extra}
        self.events.append(rec)
        if self._event_sink is not None:
            self._event_sink(rec)

    def write_events(self, path):
        with open(path, "w") as f:
            for rec in self.events:
                f.write(json.dumps(rec) + "\n")

    # -- notifications from the trial loop ---------------------------

    def notify_waypoint_reached(self, t):
        self.escalation = 0
        if self.current is not None and self.current.covered.size:
            self._covered[self.current.covered] = True
        self.current = None
        self.status = GOAL_REACHED
        self.log(t, "waypoint_reached")

    def signal_recovery(self, t, pose, detail=""):
        self.status = RECOVERY
        self.queue.clear()
        self.current = None
        self._rec_phase = "rotate"
        self._rec_remaining = 2.0 * math.pi
        self._rec_anchor = (t, (pose[0], pose[1]))
        self.log(t, "recovery_start", detail=detail)

    # -- main tick ---------------------------------------------------

    def tick(self, t, pose, grid, slam):
        if self.status == FAILED:
            return IdleCommand()
        if self.status == RECOVERY:
            return self._recovery_tick(t, pose, grid, slam)
        if self.status == OPERATING:
            if self._rotate_remaining > 0.0:
                return self._rotation_tick()
            if self.current is not None:
                return TrackCommand(self.current)
            # nothing active: fall through to dispatch
            self.status = WAITING
        if self.queue:
            return self._dispatch(t, pose, grid)
        return self._plan(t, pose, grid, slam)

    # -- dispatch / planning -----------------------------------------

    def _dispatch(self, t, pose, grid):
        wp = self.queue.pop(0)
        if self.method.level2:
            goal_pose = (self.goal[0], self.goal[1], 0.0) if self.goal else None
            theta, covered, u = control.refine_next_heading(
                grid, wp, self.method.utility_mode(self.params), goal_pose,
                self._covered, fov=self.params.fov, d_thr=self.params.max_range,
                n_headings=self.params.n_headings)
            wp.theta = theta
            wp.covered = covered
            self.log(t, "refine", theta=round(theta, 4), utility=round(u, 4))
        self.current = wp
        self.status = OPERATING
        self.log(t, "dispatch", x=round(wp.x, 3), y=round(wp.y, 3),
                 theta=round(wp.theta, 4))
        return TrackCommand(wp)

    def _plan(self, t, pose, grid, slam):
        clusters = frontier.extract_frontiers(grid, self.params.robot_radius)
        robot_cell = grid.world_to_cell(pose[0], pose[1])
        goals = frontier.candidate_goals(
            clusters, grid, robot_cell, self.goal,
            robot_radius=self.params.robot_radius,
            goal_merge_radius_cells=self.params.goal_merge_radius_cells)
        if goals:
            try:
                path = planner.plan_informative_path(
                    grid, pose, goals, self.method, self.params)
            except planner.UnreachableError:
                path = None
            if path is not None:
                self.goal = path.goal
                self.queue = list(path.waypoints)
                self._covered = np.zeros(grid.width * grid.height, dtype=bool)
                self.log(t, "plan", goal_x=round(path.goal[0], 3),
                         goal_y=round(path.goal[1], 3),
                         n_waypoints=len(path.waypoints),
                         utility=round(path.utility_value, 4))
                return self._dispatch(t, pose, grid)
        # fallback: no usable frontier goal
        graph_nodes = [(n.est[0], n.est[1]) for n in slam.nodes]
        kind, idx = frontier.fallback_action(graph_nodes, self.rng)
        if kind == frontier.GOTO_GRAPH_NODE:
            target = graph_nodes[idx]
            try:
                wps, _, _ = planner.build_waypoints(
                    grid, pose, target, self.method, self.params)
                self.goal = target
                self.queue = list(wps)
                self._covered = np.zeros(grid.width * grid.height, dtype=bool)
                self.log(t, "fallback_goto_node",
                         x=round(target[0], 3), y=round(target[1], 3))
                return self._dispatch(t, pose, grid)
            except planner.UnreachableError:
                pass
        self.log(t, "fallback_rotate")
        self._rotate_remaining = 2.0 * math.pi
        self.status = OPERATING
        return self._rotation_tick()

    def _rotation_tick(self):
        w = self.params.u_max[2]
        dt = self.params.control_dt
        step = min(w * dt, self._rotate_remaining)
        self._rotate_remaining -= step
        if self._rotate_remaining <= 1e-9:
            self._rotate_remaining = 0.0
            self.status = WAITING
        return VelocityCommand((0.0, 0.0, step / dt))

    # -- recovery ----------------------------------------------------

    def _recovery_tick(self, t, pose, grid, slam):
        p = self.params
        if self._rec_phase == "rotate":
            w = p.u_max[2]
            step = min(w * p.control_dt, self._rec_remaining)
            self._rec_remaining -= step
            if self._rec_remaining <= 1e-9:
                self._rec_phase = "translate"
                self._rec_remaining = p.recovery_backoff
                self._rec_dir = self._away_direction(pose, grid)
                self._rec_anchor = (t, (pose[0], pose[1]))
            return VelocityCommand((0.0, 0.0, step / p.control_dt))
        # translate away from the nearest known obstacle (world frame
        # direction converted to body frame)
        v = min(p.recovery_speed, self._rec_remaining / p.control_dt)
        self._rec_remaining -= v * p.control_dt
        c, s = math.cos(pose[2]), math.sin(pose[2])
        wx, wy = self._rec_dir
        u = (v * (c * wx + s * wy), v * (-s * wx + c * wy), 0.0)
        if self._rec_remaining <= 1e-9:
            # the commanded backoff is exhausted: check the robot actually
            # moved (a wedged robot gets its steps refused by the world)
            _, (x0, y0) = self._rec_anchor
            moved = math.hypot(pose[0] - x0, pose[1] - y0)
            if moved < p.stuck_eps:
                if self._rec_hard_done:
                    self.status = FAILED
                    self.log(t, "trial_failed", detail="recovery exhausted")
                    return IdleCommand()
                return self._recovery_hard(t, pose, grid, slam)
            self.status = WAITING
            self._rec_phase = None
            self._rec_hard_done = False
            self.log(t, "recovery_done")
        return VelocityCommand(u)

    def _away_direction(self, pose, grid):
        tracks = control.detect_grid_obstacles(grid, pose, radius=2.0)
        if tracks:
            best = min(tracks, key=lambda tr: math.hypot(
                tr.position[0] - pose[0], tr.position[1] - pose[1]))
            dx = pose[0] - best.position[0]
            dy = pose[1] - best.position[1]
            n = math.hypot(dx, dy)
            if n > 1e-9:
                return (dx / n, dy / n)
        return (-math.cos(pose[2]), -math.sin(pose[2]))

    def _recovery_hard(self, t, pose, grid, slam):
        self.escalation += 1
        session = slam.start_new_session()
        grid.reset()
        self.goal = None
        self._covered = None
        self.status = WAITING
        self._rec_phase = None
        self._rec_hard_done = True
        self._rec_anchor = (t, (pose[0], pose[1]))
        self.log(t, "recovery_hard", session=session)
        return IdleCommand()
