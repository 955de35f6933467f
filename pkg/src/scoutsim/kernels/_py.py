"""Pure-Python reference kernels.

Same contracts and the same floating-point operation order as the
compiled extension, so both backends produce identical results. Used as
fallback when the extension is not built; the compiled path is just
faster.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_EXP_CAP = 50.0


def _ray_setup(ox, oy, theta, res):
    ix = int(math.floor(ox / res))
    iy = int(math.floor(oy / res))
    dx = math.cos(theta)
    dy = math.sin(theta)
    if dx > 0.0:
        step_x, t_max_x, t_delta_x = 1, ((ix + 1) * res - ox) / dx, res / dx
    elif dx < 0.0:
        step_x, t_max_x, t_delta_x = -1, (ix * res - ox) / dx, -res / dx
    else:
        step_x, t_max_x, t_delta_x = 0, math.inf, math.inf
    if dy > 0.0:
        step_y, t_max_y, t_delta_y = 1, ((iy + 1) * res - oy) / dy, res / dy
    elif dy < 0.0:
        step_y, t_max_y, t_delta_y = -1, (iy * res - oy) / dy, -res / dy
    else:
        step_y, t_max_y, t_delta_y = 0, math.inf, math.inf
    return ix, iy, step_x, step_y, t_max_x, t_max_y, t_delta_x, t_delta_y


def trace_ray(occ, ox, oy, theta, max_range, res):
    """First-hit distance of a ray against a blocking mask.

    Cells are visited with integer grid line-stepping, origin cell
    excluded. Returns (distance, hit); distance is the ray parameter at
    which the hit cell is entered, or max_range when nothing blocks
    within range. Leaving the grid counts as no hit.
    """
    h, w = occ.shape
    ix, iy, step_x, step_y, t_max_x, t_max_y, t_delta_x, t_delta_y = _ray_setup(
        ox, oy, theta, res)
    while True:
        if t_max_x < t_max_y:
            ix += step_x
            t = t_max_x
            t_max_x += t_delta_x
        else:
            iy += step_y
            t = t_max_y
            t_max_y += t_delta_y
        if t > max_range:
            return max_range, False
        if ix < 0 or ix >= w or iy < 0 or iy >= h:
            return max_range, False
        if occ[iy, ix]:
            return t, True


def cast_scan(occ, px, py, theta, fov, n_rays, max_range, res):
    """Fan of n_rays rays spanning [theta - fov/2, theta + fov/2]."""
    ranges = np.empty(n_rays, dtype=np.float64)
    hits = np.zeros(n_rays, dtype=np.uint8)
    span = n_rays - 1
    for i in range(n_rays):
        a = theta - 0.5 * fov + fov * i / span
        d, hit = trace_ray(occ, px, py, a, max_range, res)
        ranges[i] = d
        hits[i] = 1 if hit else 0
    return ranges, hits


def update_scan(logodds, touched, stamp, stamp_val, px, py, angles, ranges, hits,
                res, l_hit, l_miss, l_clamp):
    """Apply one depth scan to a log-odds grid, in place.

    Each cell is updated at most once per scan: cells containing a ray
    endpoint that hit get the occupied increment, cells merely traversed
    get the free increment (occupied wins when rays disagree). The
    origin cell is never updated. `stamp`/`stamp_val` give per-scan
    dedup without clearing an array. Returns (flat indices of changed
    cells, their pre-update log-odds).
    """
    h, w = logodds.shape
    n = len(angles)
    free_list = []
    occ_list = []
    for r in range(n):
        end_dist = ranges[r]
        hit = hits[r]
        ix, iy, step_x, step_y, t_max_x, t_max_y, t_delta_x, t_delta_y = _ray_setup(
            px, py, angles[r], res)
        while True:
            if t_max_x < t_max_y:
                ix += step_x
                t = t_max_x
                t_max_x += t_delta_x
            else:
                iy += step_y
                t = t_max_y
                t_max_y += t_delta_y
            if ix < 0 or ix >= w or iy < 0 or iy >= h:
                break
            if hit:
                t_next = t_max_x if t_max_x < t_max_y else t_max_y
                if t_next > end_dist + 1e-12:
                    # this cell's span contains the ray endpoint: hit cell
                    idx = iy * w + ix
                    if stamp[iy, ix] != stamp_val + 1:
                        occ_list.append(idx)
                        stamp[iy, ix] = stamp_val + 1
                    break
            elif t > end_dist:
                break
            if stamp[iy, ix] < stamp_val:
                free_list.append(iy * w + ix)
                stamp[iy, ix] = stamp_val

    flat_lo = logodds.reshape(-1)
    flat_touched = touched.reshape(-1)
    changed = []
    old = []
    was_touched = []
    for idx in occ_list:
        old_l = flat_lo[idx]
        new_l = old_l + l_hit
        if new_l > l_clamp:
            new_l = l_clamp
        changed.append(idx)
        old.append(old_l)
        was_touched.append(flat_touched[idx])
        flat_lo[idx] = new_l
        flat_touched[idx] = True
    flat_stamp = stamp.reshape(-1)
    for idx in free_list:
        if flat_stamp[idx] == stamp_val + 1:
            continue  # promoted to occupied by another ray
        old_l = flat_lo[idx]
        new_l = old_l + l_miss
        if new_l < -l_clamp:
            new_l = -l_clamp
        changed.append(idx)
        old.append(old_l)
        was_touched.append(flat_touched[idx])
        flat_lo[idx] = new_l
        flat_touched[idx] = True
    return (np.asarray(changed, dtype=np.int64),
            np.asarray(old, dtype=np.float64),
            np.asarray(was_touched, dtype=np.uint8))


def disc_visibility(block, px, py, d_thr, res):
    """Visibility of every cell in the disc of radius d_thr around (px, py).

    A cell is visible when the ray from the query point to its center
    enters no blocking cell strictly before the cell itself; a blocking
    cell is itself visible (its front face can be seen). Returns flat
    indices, bearings, and center distances of visible cells, row-major
    order. The cell containing the query point is included with
    bearing 0.
    """
    h, w = block.shape
    ix0 = max(0, int(math.floor((px - d_thr) / res)))
    ix1 = min(w - 1, int(math.floor((px + d_thr) / res)))
    iy0 = max(0, int(math.floor((py - d_thr) / res)))
    iy1 = min(h - 1, int(math.floor((py + d_thr) / res)))
    pix = int(math.floor(px / res))
    piy = int(math.floor(py / res))

    idx_out = []
    bearing_out = []
    dist_out = []
    for iy in range(iy0, iy1 + 1):
        cy = (iy + 0.5) * res
        for ix in range(ix0, ix1 + 1):
            cx = (ix + 0.5) * res
            dx = cx - px
            dy = cy - py
            dist = math.sqrt(dx * dx + dy * dy)
            if dist > d_thr:
                continue
            if ix == pix and iy == piy:
                idx_out.append(iy * w + ix)
                bearing_out.append(0.0)
                dist_out.append(dist)
                continue
            theta = math.atan2(dy, dx)
            jx, jy, step_x, step_y, t_max_x, t_max_y, t_delta_x, t_delta_y = \
                _ray_setup(px, py, theta, res)
            visible = True
            while True:
                if t_max_x < t_max_y:
                    jx += step_x
                    t_max_x += t_delta_x
                else:
                    jy += step_y
                    t_max_y += t_delta_y
                if jx == ix and jy == iy:
                    break
                if jx < 0 or jx >= w or jy < 0 or jy >= h:
                    visible = False
                    break
                if min(t_max_x, t_max_y) > dist + res:
                    # numerical safety: ray slid past the target cell
                    break
                if block[jy, jx]:
                    visible = False
                    break
            if visible:
                idx_out.append(iy * w + ix)
                bearing_out.append(theta)
                dist_out.append(dist)
    return (np.asarray(idx_out, dtype=np.int64),
            np.asarray(bearing_out, dtype=np.float64),
            np.asarray(dist_out, dtype=np.float64))


def segment_clear(occ, x0, y0, x1, y1, res):
    """True when no blocking cell lies strictly between the two points.

    The cells containing either endpoint never block.
    """
    h, w = occ.shape
    dist = math.sqrt((x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0))
    if dist < 1e-12:
        return True
    tx = int(math.floor(x1 / res))
    ty = int(math.floor(y1 / res))
    theta = math.atan2(y1 - y0, x1 - x0)
    ix, iy, step_x, step_y, t_max_x, t_max_y, t_delta_x, t_delta_y = _ray_setup(
        x0, y0, theta, res)
    while True:
        if t_max_x < t_max_y:
            ix += step_x
            t = t_max_x
            t_max_x += t_delta_x
        else:
            iy += step_y
            t = t_max_y
            t_max_y += t_delta_y
        if t >= dist - 1e-12:
            return True
        if ix == tx and iy == ty:
            return True
        if ix < 0 or ix >= w or iy < 0 or iy >= h:
            return False
        if occ[iy, ix]:
            return False


def _wrap(a):
    while a > math.pi:
        a -= 2.0 * math.pi
    while a <= -math.pi:
        a += 2.0 * math.pi
    return a


def nmpc_eval(s0, U, target, qx, rdiag, qobs, obs, dt, d_min, penalty_w, want_grad):
    """Cost (and gradient) of an NMPC control sequence by adjoint rollout.

    Dynamics: omnidirectional body-frame velocities integrated with the
    midpoint rule. Cost: state tracking at every step plus terminal,
    control effort, obstacle proximity force h = exp(0.1/d^2) - 1, and a
    soft clearance penalty penalty_w * max(0, d_min - d)^2. `obs` has
    shape (K, N, 2): predicted obstacle positions per horizon step.

    Returns (J, grad) with grad of shape (N, 3); grad is None when
    want_grad is false.
    """
    N = U.shape[0]
    K = obs.shape[0]
    qx0, qx1, qx2 = qx[0], qx[1], qx[2]
    r0, r1, r2 = rdiag[0], rdiag[1], rdiag[2]
    wx, wy, wt = target[0], target[1], target[2]

    xs = np.empty(N + 1)
    ys = np.empty(N + 1)
    ths = np.empty(N + 1)
    xs[0], ys[0], ths[0] = s0[0], s0[1], s0[2]

    J = 0.0
    for n in range(N):
        x, y, th = xs[n], ys[n], ths[n]
        ex = x - wx
        ey = y - wy
        et = _wrap(th - wt)
        J += qx0 * ex * ex + qx1 * ey * ey + qx2 * et * et
        ux, uy, ut = U[n, 0], U[n, 1], U[n, 2]
        J += r0 * ux * ux + r1 * uy * uy + r2 * ut * ut
        for k in range(K):
            dxo = x - obs[k, n, 0]
            dyo = y - obs[k, n, 1]
            d2 = dxo * dxo + dyo * dyo
            if d2 < 1e-12:
                d2 = 1e-12
            e = 0.1 / d2
            if e > _EXP_CAP:
                e = _EXP_CAP
            hk = math.exp(e) - 1.0
            J += qobs * hk * hk
            d = math.sqrt(d2)
            if d < d_min:
                J += penalty_w * (d_min - d) * (d_min - d)
        tm = th + 0.5 * dt * ut
        c = math.cos(tm)
        s = math.sin(tm)
        xs[n + 1] = x + dt * (ux * c - uy * s)
        ys[n + 1] = y + dt * (ux * s + uy * c)
        ths[n + 1] = th + dt * ut

    ex = xs[N] - wx
    ey = ys[N] - wy
    et = _wrap(ths[N] - wt)
    J += qx0 * ex * ex + qx1 * ey * ey + qx2 * et * et

    if not want_grad:
        return J, None

    grad = np.zeros((N, 3))
    # adjoint: lam = dJ/ds_n accumulated backward
    lx = 2.0 * qx0 * ex
    ly = 2.0 * qx1 * ey
    lt = 2.0 * qx2 * et
    for n in range(N - 1, -1, -1):
        x, y, th = xs[n], ys[n], ths[n]
        ux, uy, ut = U[n, 0], U[n, 1], U[n, 2]
        tm = th + 0.5 * dt * ut
        c = math.cos(tm)
        s = math.sin(tm)
        # d s_{n+1} / d u_n
        dxdux = dt * c
        dxduy = -dt * s
        dydux = dt * s
        dyduy = dt * c
        rot = dt * (-ux * s - uy * c)   # d x_{n+1} / d theta_n
        rot2 = dt * (ux * c - uy * s)   # d y_{n+1} / d theta_n
        gx = lx * dxdux + ly * dydux + 2.0 * r0 * ux
        gy = lx * dxduy + ly * dyduy + 2.0 * r1 * uy
        gt = lx * rot * 0.5 * dt + ly * rot2 * 0.5 * dt + lt * dt + 2.0 * r2 * ut
        grad[n, 0] = gx
        grad[n, 1] = gy
        grad[n, 2] = gt
        # d s_{n+1} / d s_n, then add stage-cost gradient at n
        nlx = lx
        nly = ly
        nlt = lx * rot + ly * rot2 + lt
        ex = x - wx
        ey = y - wy
        et = _wrap(th - wt)
        nlx += 2.0 * qx0 * ex
        nly += 2.0 * qx1 * ey
        nlt += 2.0 * qx2 * et
        for k in range(K):
            dxo = x - obs[k, n, 0]
            dyo = y - obs[k, n, 1]
            d2 = dxo * dxo + dyo * dyo
            if d2 < 1e-12:
                d2 = 1e-12
            e = 0.1 / d2
            capped = e > _EXP_CAP
            if capped:
                e = _EXP_CAP
            ee = math.exp(e)
            hk = ee - 1.0
            if not capped:
                # d(h^2)/d(d2) = 2 h * ee * (-0.1/d2^2)
                dcost_dd2 = qobs * 2.0 * hk * ee * (-0.1 / (d2 * d2))
                nlx += dcost_dd2 * 2.0 * dxo
                nly += dcost_dd2 * 2.0 * dyo
            d = math.sqrt(d2)
            if d < d_min and d > 1e-9:
                dpen_dd = -2.0 * penalty_w * (d_min - d)
                nlx += dpen_dd * dxo / d
                nly += dpen_dd * dyo / d
        lx, ly, lt = nlx, nly, nlt
    return J, grad
