"""Pose estimation with odometry drift, a pose graph of visited nodes, a
feature-overlap loop-closure model, and map/trajectory rectification on
closure. A minimal stand-in for a graph-feature V-SLAM backend."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from scoutsim.geom import compose, wrap_angle


@dataclass
class GraphNode:
    node_id: int
    t: float
    est: tuple              # estimated pose at creation (corrected on closures)
    gt: tuple               # true pose at creation (oracle, for ATE only)
    features: frozenset
    session: int
    err: tuple              # accumulated (dx, dy, dth) estimate error at creation


@dataclass
class ScanRecord:
    t: float
    gt_pose: tuple
    err: tuple              # estimate error at record time (corrected on closures)
    angles: np.ndarray      # body-frame ray angles (heading-relative)
    ranges: np.ndarray
    hits: np.ndarray

    def est_pose(self):
        return (self.gt_pose[0] + self.err[0], self.gt_pose[1] + self.err[1],
                wrap_angle(self.gt_pose[2] + self.err[2]))


class SlamProxy:
    """Owns the pose estimate, the node graph, and the scan buffer."""

    def __init__(self, start_pose, *, n_match=8, node_linear_spacing=0.3,
                 node_angular_spacing=0.3, recency_window=10.0,
                 closure_cooldown=3.0, eps_lc=0.8, scan_buffer=2000):
        self.n_match = n_match
        self.node_linear_spacing = node_linear_spacing
        self.node_angular_spacing = node_angular_spacing
        self.recency_window = recency_window
        self.closure_cooldown = closure_cooldown
        self.eps_lc = eps_lc
        self._last_closure_t = None
        self.scan_buffer_size = scan_buffer
        self.estimate = tuple(start_pose)
        self.nodes: list[GraphNode] = []
        self.edges: list[tuple] = []
        self.closures: list[tuple] = []
        self.session = 0
        self.scans: list[ScanRecord] = []
        self.archived_scans: list[ScanRecord] = []
        self._last_node_pose = None

    # -- odometry ----------------------------------------------------

    def integrate_odometry(self, noisy_delta):
        """Compose a noisy body-frame delta onto the estimate."""
        self.estimate = compose(self.estimate, noisy_delta)
        return self.estimate

    def error_vs(self, gt_pose):
        return (self.estimate[0] - gt_pose[0], self.estimate[1] - gt_pose[1],
                wrap_angle(self.estimate[2] - gt_pose[2]))

    # -- scan buffer -------------------------------------------------

    def record_scan(self, t, gt_pose, body_angles, ranges, hits):
        self.scans.append(ScanRecord(t, tuple(gt_pose), self.error_vs(gt_pose),
                                     body_angles, ranges, hits))
        if len(self.scans) > self.scan_buffer_size:
            del self.scans[0]

    # -- graph -------------------------------------------------------

    def maybe_add_node(self, t, gt_pose, feature_ids):
        """Add a node when the robot moved or rotated enough since the last
        one. Returns the new node, or None."""
        if self._last_node_pose is not None:
            dx = self.estimate[0] - self._last_node_pose[0]
            dy = self.estimate[1] - self._last_node_pose[1]
            dth = abs(wrap_angle(self.estimate[2] - self._last_node_pose[2]))
            if math.hypot(dx, dy) < self.node_linear_spacing \
                    and dth < self.node_angular_spacing:
                return None
        node = GraphNode(node_id=len(self.nodes), t=t, est=self.estimate,
                         gt=tuple(gt_pose), features=frozenset(feature_ids),
                         session=self.session, err=self.error_vs(gt_pose))
        if self.nodes and self.nodes[-1].session == self.session:
            self.edges.append((self.nodes[-1].node_id, node.node_id))
        self.nodes.append(node)
        self._last_node_pose = self.estimate
        return node

    def detect_loop_closure(self, t, visible_feature_ids):
        """Oldest node sharing at least n_match features with the current
        view, outside the recency window; None otherwise."""
        view = frozenset(visible_feature_ids)
        if len(view) < self.n_match:
            return None
        if (self._last_closure_t is not None
                and t - self._last_closure_t < self.closure_cooldown):
            return None
        for node in self.nodes:
            if t - node.t < self.recency_window:
                continue
            if len(view & node.features) >= self.n_match:
                return node
        return None

    def apply_closure(self, match: GraphNode, t, gt_pose):
        """Contract the accumulated error toward the matched node's recorded
        error; interpolate the adjustment over the nodes and scans since
        the match. Returns True when sessions were merged."""
        err = self.error_vs(gt_pose)
        adj = (self.eps_lc * (match.err[0] - err[0]),
               self.eps_lc * (match.err[1] - err[1]),
               self.eps_lc * wrap_angle(match.err[2] - err[2]))
        span = max(t - match.t, 1e-9)

        def alpha(tq):
            return min(1.0, max(0.0, (tq - match.t) / span))

        for node in self.nodes:
            a = alpha(node.t)
            if a <= 0.0:
                continue
            node.err = (node.err[0] + a * adj[0], node.err[1] + a * adj[1],
                        wrap_angle(node.err[2] + a * adj[2]))
            node.est = (node.gt[0] + node.err[0], node.gt[1] + node.err[1],
                        wrap_angle(node.gt[2] + node.err[2]))
        for scan in self.scans:
            a = alpha(scan.t)
            if a <= 0.0:
                continue
            scan.err = (scan.err[0] + a * adj[0], scan.err[1] + a * adj[1],
                        wrap_angle(scan.err[2] + a * adj[2]))

        new_err = (err[0] + adj[0], err[1] + adj[1], wrap_angle(err[2] + adj[2]))
        self.estimate = (gt_pose[0] + new_err[0], gt_pose[1] + new_err[1],
                         wrap_angle(gt_pose[2] + new_err[2]))
        self._last_node_pose = self.estimate
        merged = match.session != self.session
        if merged:
            # sessions merge: the pre-recovery scans come back into the
            # rectification buffer so the cumulative map is restored
            self.session = match.session
            self.scans = (self.archived_scans + self.scans)[-self.scan_buffer_size:]
            self.archived_scans = []
        self.closures.append((match.node_id, len(self.nodes) - 1, t))
        self._last_closure_t = t
        return merged

    def start_new_session(self):
        """Recovery hard: fresh mapping session with the current pose as
        origin. The old session's scans are stashed and return on a
        merging closure."""
        self.session = max(n.session for n in self.nodes) + 1 if self.nodes \
            else self.session + 1
        self.archived_scans = (self.archived_scans + self.scans)[-self.scan_buffer_size:]
        self.scans = []
        self._last_node_pose = None
        return self.session

    # -- metrics -----------------------------------------------------

    def ate_rmse(self):
        """RMS position error of graph-node estimates vs. ground truth."""
        if not self.nodes:
            return 0.0
        sq = [((n.est[0] - n.gt[0]) ** 2 + (n.est[1] - n.gt[1]) ** 2)
              for n in self.nodes]
        return math.sqrt(sum(sq) / len(sq))

    def rectify_grid(self, grid):
        """Rebuild the estimated map from the buffered scans along the
        corrected trajectory."""
        grid.reset()
        for scan in self.scans:
            pose = scan.est_pose()
            grid.update_from_scan(pose, scan.angles + pose[2], scan.ranges,
                                  scan.hits, track_entropy=False)
        grid.rebuild_entropy_cache()

    # -- serialization -----------------------------------------------

    def dump(self, path):
        """Line-oriented text dump for post-hoc inspection."""
        with open(path, "w") as f:
            for n in self.nodes:
                feats = ",".join(str(i) for i in sorted(n.features))
                f.write(f"NODE {n.node_id} {n.t:.3f} {n.est[0]:.6f} {n.est[1]:.6f} "
                        f"{n.est[2]:.6f} session={n.session} feat={feats}\n")
            for (i, j) in self.edges:
                f.write(f"EDGE {i} {j}\n")
            for (i, j, t) in self.closures:
                f.write(f"CLOSURE {i} {j} {t:.3f}\n")
