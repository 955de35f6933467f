"""Simulation parameters and the flat key=value config file format.

Every physical parameter of a trial lives here so that runs are fully
reproducible from the echoed config. File format: one `key = value` per
line, `#` comments, keys matching the SimParams field names.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path


@dataclass
class SimParams:
    # occupancy grid
    resolution: float = 0.1          # m per cell
    l_hit: float = 0.85              # log-odds increment for a hit cell
    l_miss: float = -0.4             # log-odds increment for a traversed cell
    l_clamp: float = 3.5             # symmetric log-odds bound
    p_thr: float = 0.7               # occupied-class probability threshold

    # depth sensor
    fov_deg: float = 69.4
    max_range: float = 4.0           # m, also the visibility radius d_thr
    n_rays: int = 87

    # robot platform
    u_max_x: float = 1.0             # m/s
    u_max_y: float = 1.0             # m/s
    u_max_theta: float = 1.0         # rad/s
    v_tr_max: float = 1.0            # m/s bound on sqrt(ux^2 + uy^2)
    d_min: float = 0.25              # m obstacle clearance
    robot_radius: float = 0.18       # m

    # three-wheel omnidrive geometry (for wheel-rotation accounting)
    wheel_radius: float = 0.04       # m
    base_radius: float = 0.175      # m
    wheel_angle_0_deg: float = 90.0
    wheel_angle_1_deg: float = 210.0
    wheel_angle_2_deg: float = 330.0

    # utility
    kappa1: float = 1.0              # obstacle bonus
    d_l: float = 0.2                 # lower clamp of the goal-distance weight
    d_h: float = 0.8                 # upper clamp of the goal-distance weight
    rho: float = 0.25                # path-utility discount rate
    n_headings: int = 16             # heading discretization for the argmax

    # planner
    waypoint_spacing: float = 1.0    # m
    unknown_cost_factor: float = 1.2  # traversal cost multiplier in unknown space
    goal_merge_radius_cells: int = 2

    # NMPC
    horizon: int = 20
    control_dt: float = 0.1          # s, also the decision-cycle period
    q_pos: float = 5.0
    q_heading: float = 2.0
    r_effort: float = 0.5
    q_obs: float = 1.0
    max_obstacles: int = 10
    nmpc_iters: int = 30
    clearance_penalty: float = 200.0

    # third-level heading blend
    kappa2: float = -6.0
    kappa3: float = -0.5

    # odometry noise model
    odo_sigma_trans: float = 0.02    # sigma per meter of translation
    odo_sigma_rot: float = 0.01      # sigma (rad) per rad of rotation
    odo_sigma_floor: float = 0.0005  # per-step sigma floor
    odo_bias_trans: float = 0.004    # m drift bias per meter travelled
    odo_bias_rot: float = 0.002      # rad bias per meter travelled

    # SLAM proxy
    n_match: int = 8                 # shared features needed for a closure
    node_linear_spacing: float = 0.3  # m
    node_angular_spacing: float = 0.3  # rad
    recency_window: float = 10.0     # s
    closure_cooldown: float = 3.0    # s between accepted closures
    eps_lc: float = 0.8              # error contraction factor on closure
    scan_buffer: int = 2000          # scans kept for rectification rebuild

    # FSM
    stuck_eps: float = 0.05          # m of displacement below which a
                                     # completed recovery backoff counts as stuck
    recovery_backoff: float = 0.4    # m translated away from the obstacle
    recovery_speed: float = 0.5      # m/s during the recovery translation
    reach_pos_tol: float = 0.3       # m
    reach_ang_tol: float = 0.15      # rad
    waypoint_timeout: float = 10.0   # s without arrival before replanning

    # world features
    feature_offset: float = 0.1      # m off obstacle boundaries
    feature_density: float = 0.5     # expected features per boundary cell

    # metrics
    metrics_dt: float = 0.5          # s between raw samples
    bucket_dt: float = 2.0           # s bucketing window

    @property
    def fov(self) -> float:
        return math.radians(self.fov_deg)

    @property
    def u_max(self):
        return (self.u_max_x, self.u_max_y, self.u_max_theta)

    @property
    def wheel_angles(self):
        return (math.radians(self.wheel_angle_0_deg),
                math.radians(self.wheel_angle_1_deg),
                math.radians(self.wheel_angle_2_deg))

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {v!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "SimParams":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in fields:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            ftype = fields[key].type
            try:
                kwargs[key] = int(raw) if ftype == "int" else float(raw)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {raw!r}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "SimParams":
        return cls.from_text(Path(path).read_text())


class ConfigError(ValueError):
    """Malformed or unknown configuration input."""
