"""The closed-loop trial runner: sense, map, localize, decide, control,
move, measure — at a fixed 10 Hz decision cadence, deterministic per
(world, method, seed)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scoutsim import control, fsm, methods, metrics, worlds
from scoutsim.config import SimParams
from scoutsim.control import NmpcConfig, NmpcController
from scoutsim.geom import relative, wrap_angle
from scoutsim.mapping import OccupancyGrid
from scoutsim.slam import SlamProxy
from scoutsim.world import CollisionError, WorldModel, wheel_rotation_increment

_FSM_SEED_OFFSET = 1000003


@dataclass
class TrialResult:
    metrics: metrics.TrialMetrics
    status: str
    events: list
    out_dir: Path | None


def run_trial(world_name, method_name, seed, duration, out_dir=None,
              params=None):
    """Run one exploration trial and (optionally) archive its artifacts.

    Artifacts: bucketed + raw metric CSVs, final map PGM, pose-graph
    dump, JSONL event log, echoed config, flat summary."""
    method = methods.get_method(method_name)
    if params is None:
        params = SimParams()
    duration = duration * method.duration_scale

    gt, features, start = worlds.get_world(world_name, params)
    world = WorldModel(gt, features, start, seed=seed)
    grid = OccupancyGrid(gt.width, gt.height, params.resolution,
                         l_hit=params.l_hit, l_miss=params.l_miss,
                         l_clamp=params.l_clamp, p_thr=params.p_thr)
    slam = SlamProxy(start, n_match=params.n_match,
                     node_linear_spacing=params.node_linear_spacing,
                     node_angular_spacing=params.node_angular_spacing,
                     recency_window=params.recency_window,
                     closure_cooldown=params.closure_cooldown,
                     eps_lc=params.eps_lc, scan_buffer=params.scan_buffer)
    machine = fsm.ExplorationFsm(
        method, params, np.random.default_rng(seed + _FSM_SEED_OFFSET))
    nmpc = NmpcController(NmpcConfig.from_params(params))
    tm = metrics.TrialMetrics(world=str(world_name), method=method.name,
                              seed=seed)
    gt_classes = gt.classes()
    gt_hidden = gt.hidden
    reachable_free = (gt.occ == 0) & (gt.hidden == 0)
    n_reachable = max(1, int(np.sum(reachable_free)))

    dt = params.control_dt
    n_steps = int(round(duration / dt))
    sample_every = max(1, int(round(params.metrics_dt / dt)))
    path_length = 0.0
    wheel_rotation = 0.0
    status = metrics.STATUS_OK
    track_since = None
    blend_wp = None
    in_recovery_motion = False

    def sample(t):
        total, norm = grid.map_entropy()
        tm.add_sample(
            t,
            grid.explored_cells * params.resolution ** 2,
            float(np.sum((grid.touched != 0) & reachable_free)) / n_reachable,
            norm,
            grid.balanced_accuracy(gt_classes, exclude=gt_hidden),
            path_length,
            wheel_rotation,
            len(slam.closures),
            slam.ate_rmse())

    t = 0.0
    for step in range(n_steps):
        t = step * dt
        true_pose = world.pose
        est = slam.estimate

        # sense at the true pose, map at the estimated pose
        angles, ranges, hits = world.depth_scan(
            fov=params.fov, max_range=params.max_range, n_rays=params.n_rays)
        body_angles = angles - true_pose[2]
        grid.update_from_scan(est, body_angles + est[2], ranges, hits)
        slam.record_scan(t, true_pose, body_angles, ranges, hits)
        feats = world.visible_features(fov=params.fov,
                                       max_range=params.max_range)

        node = slam.maybe_add_node(t, true_pose, feats)
        if node is not None:
            match = slam.detect_loop_closure(t, feats)
            if match is not None:
                merged = slam.apply_closure(match, t, true_pose)
                slam.rectify_grid(grid)
                machine.log(t, "closure", node=match.node_id,
                            merged=bool(merged))

        cmd = machine.tick(t, slam.estimate, grid, slam)
        u = (0.0, 0.0, 0.0)
        in_recovery_motion = (machine.status == fsm.RECOVERY)
        if isinstance(cmd, fsm.TrackCommand):
            wp = cmd.waypoint
            est = slam.estimate
            d_t = math.hypot(wp.x - est[0], wp.y - est[1])
            theta_t = wp.theta
            if method.level3:
                # feature retention works off the latest graph node's
                # feature set, not the instantaneous view
                node_feats = sorted(slam.nodes[-1].features) if slam.nodes else []
                pts = world.features[node_feats] if node_feats else np.empty((0, 2))
                beta = control.feature_heading(
                    pts, (wp.x, wp.y), est[2], grid, fov=params.fov,
                    max_range=params.max_range, n_headings=params.n_headings)
                theta_t = control.blended_heading(
                    wp.theta, beta, d_t, params.kappa2, params.kappa3)
                if wp is not blend_wp:
                    machine.log(t, "blend", theta_star=round(wp.theta, 4),
                                beta=round(beta, 4), gamma=round(theta_t, 4))
                    blend_wp = wp
            # arrival compares against the heading actually being tracked
            # (the blended one when level 3 is on)
            if (d_t <= params.reach_pos_tol
                    and abs(wrap_angle(est[2] - theta_t)) <= params.reach_ang_tol):
                machine.notify_waypoint_reached(t)
                track_since = None
                blend_wp = None
            elif track_since is not None and t - track_since > params.waypoint_timeout:
                machine.log(t, "waypoint_timeout", d=round(d_t, 3),
                            heading_err=round(
                                abs(wrap_angle(est[2] - theta_t)), 3))
                machine.queue.clear()
                machine.current = None
                machine.status = fsm.WAITING
                nmpc.reset()
                track_since = None
                blend_wp = None
            else:
                if track_since is None:
                    track_since = t
                tracks = control.detect_grid_obstacles(grid, est, radius=2.0)
                tracks = control.obstacle_selection(
                    tracks, nmpc.predicted_states, params.max_obstacles)
                out, info = nmpc.solve(est, (wp.x, wp.y, theta_t), tracks)
                if isinstance(out, str) and out == control.RECOVERY:
                    machine.signal_recovery(t, est, detail="clearance")
                    nmpc.reset()
                    track_since = None
                    blend_wp = None
                    in_recovery_motion = True
                else:
                    u = (float(out[0]), float(out[1]), float(out[2]))
        elif isinstance(cmd, fsm.VelocityCommand):
            u = cmd.u
        # IdleCommand: u stays zero

        prev = world.pose
        try:
            world.step(u, dt)
        except CollisionError:
            if in_recovery_motion:
                # wedged during recovery: the world refuses the motion and
                # the robot stays put, driving the stuck escalation
                pass
            else:
                status = metrics.STATUS_COLLISION
                machine.log(t, "collision")
                break
        delta = relative(prev, world.pose)
        odo = world.odometry_reading(
            delta, sigma_trans=params.odo_sigma_trans,
            sigma_rot=params.odo_sigma_rot,
            sigma_floor=params.odo_sigma_floor,
            bias_trans=params.odo_bias_trans, bias_rot=params.odo_bias_rot)
        slam.integrate_odometry(odo)
        path_length += math.hypot(world.pose[0] - prev[0],
                                  world.pose[1] - prev[1])
        wheel_rotation += wheel_rotation_increment(
            u, dt, params.wheel_radius, params.base_radius,
            params.wheel_angles)

        if step % sample_every == 0:
            sample(t)

    if machine.status == fsm.FAILED and status == metrics.STATUS_OK:
        status = metrics.STATUS_FAILED
    tm.status = status
    sample(n_steps * dt)

    out_path = None
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        metrics.write_csv(out_path / "raw_metrics.csv", tm.rows)
        metrics.write_csv(out_path / "metrics.csv",
                          metrics.bucket_metrics(tm.rows, params.bucket_dt))
        grid.save_pgm(out_path / "map.pgm")
        slam.dump(out_path / "graph.txt")
        machine.write_events(out_path / "events.jsonl")
        params.save(out_path / "config.txt")
        metrics.write_summary(out_path / "summary.txt", tm.final())
    return TrialResult(metrics=tm, status=status, events=machine.events,
                       out_dir=out_path)
