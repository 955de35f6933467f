"""Ground-truth world: binary grid, feature points, omnidirectional robot
kinematics, simulated depth sensor, odometry noise, and wheel accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from scoutsim import kernels
from scoutsim.geom import wrap_angle


class CollisionError(RuntimeError):
    """Robot entered an occupied ground-truth cell; the trial aborts."""


class WorldError(ValueError):
    pass


@dataclass
class GroundTruth:
    occ: np.ndarray          # uint8 (h, w), 1 = occupied
    hidden: np.ndarray       # uint8 (h, w), 1 = unreachable void, excluded from scoring
    resolution: float

    @property
    def height(self):
        return self.occ.shape[0]

    @property
    def width(self):
        return self.occ.shape[1]

    def classes(self):
        """Ground-truth class grid for balanced-accuracy scoring."""
        from scoutsim import mapping
        out = np.full(self.occ.shape, mapping.FREE, dtype=np.uint8)
        out[self.occ != 0] = mapping.OCCUPIED
        return out

    def free_area_cells(self):
        """Reachable (non-hidden) free cells; the exploration denominator."""
        return int(np.sum((self.occ == 0) & (self.hidden == 0)))


def step_kinematics(pose, u, dt):
    """Advance a world-frame pose under body-frame velocities.

    Midpoint (2nd-order) integration: the translation is rotated by the
    heading at the middle of the step.
    """
    if dt <= 0:
        raise WorldError(f"dt must be positive, got {dt}")
    x, y, th = pose
    ux, uy, ut = u
    tm = th + 0.5 * dt * ut
    c = math.cos(tm)
    s = math.sin(tm)
    return (x + dt * (ux * c - uy * s),
            y + dt * (ux * s + uy * c),
            wrap_angle(th + dt * ut))


def wheel_rotation_increment(u, dt, wheel_radius, base_radius, wheel_angles):
    """Total |wheel angular displacement| of a 3-wheel omnidrive step.

    Inverse kinematics: wheel speed_i =
    (-sin(a_i) u_x + cos(a_i) u_y + base_radius u_theta) / wheel_radius.
    """
    if dt <= 0:
        raise WorldError(f"dt must be positive, got {dt}")
    ux, uy, ut = u
    total = 0.0
    for a in wheel_angles:
        speed = (-math.sin(a) * ux + math.cos(a) * uy + base_radius * ut) / wheel_radius
        total += abs(speed) * dt
    return total


class WorldModel:
    """One trial's ground truth, features, and true robot state."""

    def __init__(self, gt: GroundTruth, features: np.ndarray, start_pose, seed=0):
        self.gt = gt
        self.features = np.asarray(features, dtype=np.float64).reshape(-1, 2)
        self.pose = (float(start_pose[0]), float(start_pose[1]), float(start_pose[2]))
        self.rng = np.random.default_rng(seed)
        ix, iy = self._cell(self.pose[0], self.pose[1])
        if gt.occ[iy, ix]:
            raise CollisionError(f"start pose {start_pose} inside an obstacle")

    def _cell(self, x, y):
        res = self.gt.resolution
        ix = int(math.floor(x / res))
        iy = int(math.floor(y / res))
        if not (0 <= ix < self.gt.width and 0 <= iy < self.gt.height):
            raise WorldError(f"position ({x}, {y}) outside the world")
        return ix, iy

    def step(self, u, dt):
        """Advance the true pose; collision with the ground truth aborts."""
        new_pose = step_kinematics(self.pose, u, dt)
        ix, iy = self._cell(new_pose[0], new_pose[1])
        if self.gt.occ[iy, ix]:
            raise CollisionError(f"collision at {new_pose[:2]}")
        self.pose = new_pose
        return new_pose

    def depth_scan(self, pose=None, *, fov, max_range, n_rays):
        """Simulated depth camera: first-hit ranges for a uniform ray fan.

        Returns (angles, ranges, hits) with absolute world ray headings.
        """
        if n_rays < 2:
            raise WorldError("need at least 2 rays")
        if pose is None:
            pose = self.pose
        px, py, th = pose
        ix, iy = self._cell(px, py)
        if self.gt.occ[iy, ix]:
            raise CollisionError(f"scan pose {pose[:2]} inside an obstacle")
        ranges, hits = kernels.cast_scan(
            self.gt.occ, px, py, th, fov, n_rays, max_range, self.gt.resolution)
        angles = th - 0.5 * fov + fov * np.arange(n_rays) / (n_rays - 1)
        return angles, ranges, hits

    def visible_features(self, pose=None, *, fov, max_range):
        """Ids of features in range, inside the FOV wedge, with clear LOS."""
        if pose is None:
            pose = self.pose
        px, py, th = pose
        if self.features.size == 0:
            return []
        dx = self.features[:, 0] - px
        dy = self.features[:, 1] - py
        dist = np.hypot(dx, dy)
        bearing = np.arctan2(dy, dx) - th
        bearing = np.arctan2(np.sin(bearing), np.cos(bearing))
        cand = np.nonzero((dist <= max_range) & (np.abs(bearing) <= 0.5 * fov))[0]
        out = []
        for i in cand:
            if kernels.segment_clear(self.gt.occ, px, py,
                                     self.features[i, 0], self.features[i, 1],
                                     self.gt.resolution):
                out.append(int(i))
        return out

    def odometry_reading(self, true_delta, *, sigma_trans, sigma_rot,
                         sigma_floor, bias_trans, bias_rot):
        """Noisy body-frame delta: scale bias plus seeded Gaussian noise.

        Noise sigma is proportional to the step magnitude with a small
        floor; the heading picks up a bias per meter travelled, which
        makes long uncorrected trajectories curve deterministically.
        """
        dx, dy, dth = true_delta
        trans = math.hypot(dx, dy)
        st = sigma_trans * trans + sigma_floor
        sr = sigma_rot * abs(dth) + sigma_floor
        noise = self.rng.normal(0.0, 1.0, 3)
        return (dx * (1.0 + bias_trans) + st * noise[0],
                dy * (1.0 + bias_trans) + st * noise[1],
                dth + bias_rot * trans + sr * noise[2])
