"""Bundled desk-scale worlds, feature generation along obstacle
boundaries, and the world file format (ground-truth PGM + textual
sidecar with start pose and feature list)."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy import ndimage

from scoutsim import mapping
from scoutsim.world import GroundTruth, WorldError

_FOUR = ndimage.generate_binary_structure(2, 1)


def _canvas(width_m, height_m, resolution):
    """Empty room: free interior, one-cell border walls."""
    w = int(round(width_m / resolution))
    h = int(round(height_m / resolution))
    occ = np.zeros((h, w), dtype=np.uint8)
    occ[0, :] = occ[-1, :] = 1
    occ[:, 0] = occ[:, -1] = 1
    return occ


def _fill_rect(occ, resolution, x0, y0, x1, y1, value=1):
    """Set an axis-aligned rectangle (world meters) of cells."""
    c0 = int(round(x0 / resolution))
    c1 = int(round(x1 / resolution))
    r0 = int(round(y0 / resolution))
    r1 = int(round(y1 / resolution))
    occ[max(r0, 0):r1, max(c0, 0):c1] = value


def hidden_mask(occ, start_xy, resolution):
    """Free cells not connected to the start position: sealed voids,
    excluded from coverage and accuracy scoring."""
    free = occ == 0
    labels, _ = ndimage.label(free, structure=_FOUR)
    ix = int(math.floor(start_xy[0] / resolution))
    iy = int(math.floor(start_xy[1] / resolution))
    lab = labels[iy, ix]
    if lab == 0:
        raise WorldError(f"start {start_xy} is not in free space")
    return (free & (labels != lab)).astype(np.uint8)


def generate_features(occ, resolution, seed, *, offset=0.1, density=0.5):
    """Feature points just off obstacle boundaries, in free space.

    Each free cell adjacent (4-connectivity) to an occupied cell spawns a
    feature with probability `density`, displaced `offset` meters away
    from the mean direction of its occupied neighbors. Deterministic per
    (world, seed)."""
    rng = np.random.default_rng(seed)
    free = occ == 0
    h, w = occ.shape
    pts = []
    ys, xs = np.nonzero(free & ndimage.binary_dilation(occ != 0, structure=_FOUR))
    for y, x in zip(ys, xs):
        if rng.random() >= density:
            continue
        dx = dy = 0.0
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < w and 0 <= ny < h and occ[ny, nx]:
                dx += x - nx
                dy += y - ny
        n = math.hypot(dx, dy)
        if n < 1e-9:
            continue
        fx = (x + 0.5) * resolution + offset * dx / n
        fy = (y + 0.5) * resolution + offset * dy / n
        fix = int(math.floor(fx / resolution))
        fiy = int(math.floor(fy / resolution))
        if 0 <= fix < w and 0 <= fiy < h and free[fiy, fix]:
            pts.append((fx, fy))
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)


# -- bundled worlds ---------------------------------------------------

def _build_toy_room(resolution):
    """5 x 4 m room with one central box: smallest useful test world."""
    occ = _canvas(5.0, 4.0, resolution)
    _fill_rect(occ, resolution, 2.2, 1.6, 3.0, 2.4)
    return occ, (1.0, 1.0, 0.0)


def _build_apartment(resolution):
    """12 x 10 m flat: four rooms off a hallway, doorways, furniture,
    and one sealed closet (hidden void)."""
    occ = _canvas(12.0, 10.0, resolution)
    # horizontal wall splitting the flat, hallway along y ~ 4.6..5.4
    _fill_rect(occ, resolution, 0.0, 4.4, 12.0, 4.6)
    _fill_rect(occ, resolution, 0.0, 5.4, 12.0, 5.6)
    # doorways through both hallway walls
    _fill_rect(occ, resolution, 2.4, 4.4, 3.6, 4.6, value=0)
    _fill_rect(occ, resolution, 8.4, 4.4, 9.6, 4.6, value=0)
    _fill_rect(occ, resolution, 1.4, 5.4, 2.6, 5.6, value=0)
    _fill_rect(occ, resolution, 6.4, 5.4, 7.6, 5.6, value=0)
    _fill_rect(occ, resolution, 10.4, 5.4, 11.6, 5.6, value=0)
    # vertical separators: two lower rooms, three upper rooms
    _fill_rect(occ, resolution, 5.9, 0.0, 6.1, 4.6)
    _fill_rect(occ, resolution, 5.9, 1.8, 6.1, 3.0, value=0)   # inner door
    _fill_rect(occ, resolution, 3.9, 5.4, 4.1, 10.0)
    _fill_rect(occ, resolution, 7.9, 5.4, 8.1, 10.0)
    # furniture
    _fill_rect(occ, resolution, 1.0, 0.8, 2.2, 1.6)    # bed
    _fill_rect(occ, resolution, 4.6, 3.2, 5.4, 4.0)    # desk
    _fill_rect(occ, resolution, 8.0, 1.0, 9.2, 2.0)    # sofa
    _fill_rect(occ, resolution, 10.6, 3.2, 11.4, 4.0)  # shelf
    _fill_rect(occ, resolution, 1.6, 7.6, 2.8, 8.6)    # table
    _fill_rect(occ, resolution, 5.2, 8.2, 6.4, 9.0)    # wardrobe
    _fill_rect(occ, resolution, 9.6, 7.4, 10.4, 8.4)   # cabinet
    # sealed closet: enclosed free pocket, unreachable by construction
    _fill_rect(occ, resolution, 0.0, 9.0, 1.6, 9.2)
    _fill_rect(occ, resolution, 1.4, 9.0, 1.6, 10.0)
    return occ, (1.2, 2.8, 0.0)


def _build_loop(resolution):
    """10 x 8 m ring corridor around a solid block: forces a long loop
    with a revisit, the loop-closure scenario."""
    occ = _canvas(10.0, 8.0, resolution)
    _fill_rect(occ, resolution, 2.0, 2.0, 8.0, 6.0)
    return occ, (1.0, 1.0, 0.0)


_BUILDERS = {
    "toy_room": (_build_toy_room, 101),
    "apartment": (_build_apartment, 202),
    "loop": (_build_loop, 303),
}

WORLD_NAMES = tuple(sorted(_BUILDERS))


def build_world(name, params):
    """(GroundTruth, features, start_pose) for a bundled world name."""
    try:
        builder, feature_seed = _BUILDERS[name]
    except KeyError:
        raise WorldError(
            f"unknown world {name!r}; bundled: {', '.join(WORLD_NAMES)}") from None
    res = params.resolution
    occ, start = builder(res)
    gt = GroundTruth(occ=occ, hidden=hidden_mask(occ, start[:2], res),
                     resolution=res)
    features = generate_features(occ, res, feature_seed,
                                 offset=params.feature_offset,
                                 density=params.feature_density)
    return gt, features, start


# -- world files ------------------------------------------------------

def save_world(path, gt, features, start_pose):
    """Ground-truth PGM plus a `.world` sidecar (start pose, explicit
    feature list). The hidden mask is reconstructed from connectivity at
    load time."""
    path = Path(path)
    mapping.save_pgm(path, gt.classes(), gt.resolution)
    sidecar = path.with_suffix(path.suffix + ".world")
    sx, sy, sth = (float(v) for v in start_pose)
    lines = [f"start = {sx!r} {sy!r} {sth!r}"]
    for fx, fy in np.asarray(features).reshape(-1, 2):
        lines.append(f"feature = {float(fx)!r} {float(fy)!r}")
    sidecar.write_text("\n".join(lines) + "\n")


def load_world(path):
    """Inverse of save_world: (GroundTruth, features, start_pose)."""
    path = Path(path)
    classes, resolution, _origin = mapping.load_pgm(path)
    occ = (classes == mapping.OCCUPIED).astype(np.uint8)
    sidecar = path.with_suffix(path.suffix + ".world")
    if not sidecar.exists():
        raise WorldError(f"missing world sidecar {sidecar}")
    start = None
    features = []
    for line in sidecar.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        parts = val.split()
        if key.strip() == "start":
            start = tuple(float(v) for v in parts)
        elif key.strip() == "feature":
            features.append((float(parts[0]), float(parts[1])))
    if start is None or len(start) != 3:
        raise WorldError(f"{sidecar}: missing or malformed start pose")
    gt = GroundTruth(occ=occ, hidden=hidden_mask(occ, start[:2], resolution),
                     resolution=resolution)
    return gt, np.asarray(features, dtype=np.float64).reshape(-1, 2), start


def get_world(name_or_path, params):
    """Bundled world by name, or a world file by path."""
    if name_or_path in _BUILDERS:
        return build_world(name_or_path, params)
    p = Path(name_or_path)
    if p.exists():
        return load_world(p)
    raise WorldError(f"no bundled world or file named {name_or_path!r}")
