"""Estimated occupancy grid: log-odds updates, entropy accounting, class
partitioning, map-quality scoring, and PGM serialization."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from scoutsim import kernels

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

# PGM pixel convention (de facto occupancy-map standard)
_PGM_OCCUPIED = 0
_PGM_FREE = 254
_PGM_UNKNOWN = 205


class MapError(ValueError):
    pass


def cell_entropy(p):
    """Binary Shannon entropy in bits, with 0*log2(0) := 0."""
    p = float(p)
    if p < 0.0 or p > 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def entropy_array(p):
    """Vectorized binary entropy; safe at the extremes."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    q = p[inner]
    out[inner] = -(q * np.log2(q) + (1.0 - q) * np.log2(1.0 - q))
    return out


class OccupancyGrid:
    """Log-odds occupancy grid with an incremental entropy cache.

    "Unknown" is tracked by a touched flag, not by p == 0.5, so a cell
    whose evidence cancels back to even odds still counts as explored.
    """

    def __init__(self, width, height, resolution, *, l_hit=0.85, l_miss=-0.4,
                 l_clamp=3.5, p_thr=0.7, origin=(0.0, 0.0)):
        self.width = int(width)
        self.height = int(height)
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))
        self.l_hit = float(l_hit)
        self.l_miss = float(l_miss)
        self.l_clamp = float(l_clamp)
        self.p_thr = float(p_thr)
        self.logodds = np.zeros((self.height, self.width), dtype=np.float64)
        self.touched = np.zeros((self.height, self.width), dtype=np.uint8)
        self._stamp = np.zeros((self.height, self.width), dtype=np.int64)
        self._stamp_val = 0
        self._entropy_total = 0.0
        self._explored = 0

    # -- coordinates -------------------------------------------------

    def world_to_cell(self, x, y):
        ix = int(math.floor((x - self.origin[0]) / self.resolution))
        iy = int(math.floor((y - self.origin[1]) / self.resolution))
        return ix, iy

    def cell_center(self, ix, iy):
        return (self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution)

    def in_bounds(self, ix, iy):
        return 0 <= ix < self.width and 0 <= iy < self.height

    # -- derived fields ----------------------------------------------

    def probabilities(self):
        return 1.0 / (1.0 + np.exp(-self.logodds))

    def classes(self):
        """Exhaustive, disjoint partition into FREE / OCCUPIED / UNKNOWN."""
        p = self.probabilities()
        out = np.full((self.height, self.width), FREE, dtype=np.uint8)
        out[p >= self.p_thr] = OCCUPIED
        out[self.touched == 0] = UNKNOWN
        return out

    def blocking_mask(self):
        """Cells that occlude rays: p strictly above the obstacle threshold."""
        return (self.probabilities() > self.p_thr).astype(np.uint8)

    # -- updates -----------------------------------------------------

    def update_from_scan(self, pose, angles, ranges, hits, track_entropy=True):
        """Integrate one depth scan taken at `pose` (world frame).

        `angles` are absolute world headings per ray; a hit ray's range
        is the distance to the struck surface. Free increments go to
        traversed cells (origin cell excluded), the occupied increment
        to the hit cell. Returns the flat indices of changed cells.
        """
        angles = np.ascontiguousarray(angles, dtype=np.float64)
        ranges = np.ascontiguousarray(ranges, dtype=np.float64)
        hits = np.ascontiguousarray(hits, dtype=np.uint8)
        if angles.size == 0:
            return np.empty(0, dtype=np.int64)
        ix, iy = self.world_to_cell(pose[0], pose[1])
        if not self.in_bounds(ix, iy):
            raise MapError(f"pose {pose[:2]} outside grid bounds")
        self._stamp_val += 2
        changed, old_l, was_touched = kernels.update_scan(
            self.logodds, self.touched, self._stamp, self._stamp_val,
            pose[0] - self.origin[0], pose[1] - self.origin[1],
            angles, ranges, hits,
            self.resolution, self.l_hit, self.l_miss, self.l_clamp)
        if changed.size and track_entropy:
            flat = self.logodds.reshape(-1)
            new_p = 1.0 / (1.0 + np.exp(-flat[changed]))
            old_p = 1.0 / (1.0 + np.exp(-old_l))
            old_e = np.where(was_touched != 0, entropy_array(old_p), 0.0)
            self._entropy_total += float(np.sum(entropy_array(new_p) - old_e))
            self._explored += int(np.sum(was_touched == 0))
        return changed

    def reset(self):
        self.logodds.fill(0.0)
        self.touched.fill(0)
        self._entropy_total = 0.0
        self._explored = 0

    # -- entropy -----------------------------------------------------

    def map_entropy(self):
        """(total bits over explored cells, normalized entropy).

        An all-unknown map reports normalized entropy 1 by convention.
        """
        if self._explored == 0:
            return 0.0, 1.0
        return self._entropy_total, self._entropy_total / self._explored

    @property
    def explored_cells(self):
        return self._explored

    def recompute_entropy(self):
        """From-scratch recomputation (oracle for the incremental cache)."""
        mask = self.touched != 0
        total = float(np.sum(entropy_array(self.probabilities()[mask])))
        return total, int(np.sum(mask))

    def rebuild_entropy_cache(self):
        """Resynchronize the cache after updates with track_entropy=False
        (bulk rebuilds)."""
        self._entropy_total, self._explored = self.recompute_entropy()

    # -- scoring -----------------------------------------------------

    def balanced_accuracy(self, gt_classes, exclude=None):
        return balanced_accuracy(self.classes(), gt_classes, exclude)

    # -- serialization -----------------------------------------------

    def save_pgm(self, path):
        save_pgm(path, self.classes(), self.resolution, self.origin)


def balanced_accuracy(est_classes, gt_classes, exclude=None):
    """Mean per-class recall over the three map classes.

    Classes absent from the ground truth are excluded from the mean;
    `exclude` masks cells (e.g. physically unreachable voids) out of the
    score entirely.
    """
    est = np.asarray(est_classes)
    gt = np.asarray(gt_classes)
    if est.shape != gt.shape:
        raise MapError(f"shape mismatch: {est.shape} vs {gt.shape}")
    if exclude is not None:
        keep = np.asarray(exclude) == 0
        est = est[keep]
        gt = gt[keep]
    recalls = []
    for cls in (FREE, OCCUPIED, UNKNOWN):
        gt_mask = gt == cls
        n = int(np.sum(gt_mask))
        if n == 0:
            continue
        recalls.append(float(np.sum(est[gt_mask] == cls)) / n)
    if not recalls:
        raise MapError("ground truth contains no classes")
    return float(np.mean(recalls))


def save_pgm(path, classes, resolution, origin=(0.0, 0.0)):
    """P5 PGM (maxval 255: 0=occupied, 254=free, 205=unknown) plus a
    textual sidecar with resolution and origin."""
    classes = np.asarray(classes, dtype=np.uint8)
    h, w = classes.shape
    img = np.full((h, w), _PGM_UNKNOWN, dtype=np.uint8)
    img[classes == FREE] = _PGM_FREE
    img[classes == OCCUPIED] = _PGM_OCCUPIED
    path = Path(path)
    with path.open("wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())
    sidecar = path.with_suffix(path.suffix + ".info")
    sidecar.write_text(
        f"resolution = {resolution!r}\n"
        f"origin_x = {origin[0]!r}\n"
        f"origin_y = {origin[1]!r}\n")


def load_pgm(path):
    """Inverse of save_pgm: returns (classes, resolution, origin)."""
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise MapError(f"{path}: not a binary PGM")
    # header: magic, width, height, maxval, single whitespace, raster
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    pos += 1
    w, h, _maxval = tokens
    img = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    classes = np.full((h, w), UNKNOWN, dtype=np.uint8)
    classes[img == _PGM_FREE] = FREE
    classes[img <= 127] = OCCUPIED

    resolution = None
    origin = [0.0, 0.0]
    sidecar = path.with_suffix(path.suffix + ".info")
    if sidecar.exists():
        for line in sidecar.read_text().splitlines():
            if "=" not in line:
                continue
            key, _, val = line.partition("=")
            key = key.strip()
            if key == "resolution":
                resolution = float(val)
            elif key == "origin_x":
                origin[0] = float(val)
            elif key == "origin_y":
                origin[1] = float(val)
    if resolution is None:
        raise MapError(f"{sidecar}: missing resolution sidecar")
    return classes, resolution, (origin[0], origin[1])
