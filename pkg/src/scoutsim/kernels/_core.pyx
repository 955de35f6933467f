# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: grid raycasting, visibility, scan updates, NMPC rollout.

Mirrors scoutsim.kernels._py operation-for-operation so both backends
produce identical floating-point results.
"""

from libc.math cimport cos, sin, atan2, sqrt, exp, floor, INFINITY, M_PI

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

cdef double _EXP_CAP = 50.0


cdef inline void _ray_setup(double ox, double oy, double theta, double res,
                            long* ix, long* iy, long* step_x, long* step_y,
                            double* t_max_x, double* t_max_y,
                            double* t_delta_x, double* t_delta_y) nogil:
    cdef double dx = cos(theta)
    cdef double dy = sin(theta)
    ix[0] = <long>floor(ox / res)
    iy[0] = <long>floor(oy / res)
    if dx > 0.0:
        step_x[0] = 1
        t_max_x[0] = ((ix[0] + 1) * res - ox) / dx
        t_delta_x[0] = res / dx
    elif dx < 0.0:
        step_x[0] = -1
        t_max_x[0] = (ix[0] * res - ox) / dx
        t_delta_x[0] = -res / dx
    else:
        step_x[0] = 0
        t_max_x[0] = INFINITY
        t_delta_x[0] = INFINITY
    if dy > 0.0:
        step_y[0] = 1
        t_max_y[0] = ((iy[0] + 1) * res - oy) / dy
        t_delta_y[0] = res / dy
    elif dy < 0.0:
        step_y[0] = -1
        t_max_y[0] = (iy[0] * res - oy) / dy
        t_delta_y[0] = -res / dy
    else:
        step_y[0] = 0
        t_max_y[0] = INFINITY
        t_delta_y[0] = INFINITY


def trace_ray(cnp.uint8_t[:, ::1] occ, double ox, double oy, double theta,
              double max_range, double res):
    cdef long h = occ.shape[0]
    cdef long w = occ.shape[1]
    cdef long ix, iy, step_x, step_y
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t
    _ray_setup(ox, oy, theta, res, &ix, &iy, &step_x, &step_y,
               &t_max_x, &t_max_y, &t_delta_x, &t_delta_y)
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


def cast_scan(cnp.uint8_t[:, ::1] occ, double px, double py, double theta,
              double fov, int n_rays, double max_range, double res):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ranges = np.empty(n_rays, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] hits = np.zeros(n_rays, dtype=np.uint8)
    cdef long h = occ.shape[0]
    cdef long w = occ.shape[1]
    cdef long ix, iy, step_x, step_y
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t, a
    cdef int i, span = n_rays - 1
    cdef bint done
    for i in range(n_rays):
        a = theta - 0.5 * fov + fov * i / span
        _ray_setup(px, py, a, res, &ix, &iy, &step_x, &step_y,
                   &t_max_x, &t_max_y, &t_delta_x, &t_delta_y)
        done = False
        while not done:
            if t_max_x < t_max_y:
                ix += step_x
                t = t_max_x
                t_max_x += t_delta_x
            else:
                iy += step_y
                t = t_max_y
                t_max_y += t_delta_y
            if t > max_range:
                ranges[i] = max_range
                hits[i] = 0
                done = True
            elif ix < 0 or ix >= w or iy < 0 or iy >= h:
                ranges[i] = max_range
                hits[i] = 0
                done = True
            elif occ[iy, ix]:
                ranges[i] = t
                hits[i] = 1
                done = True
    return ranges, hits


def update_scan(cnp.float64_t[:, ::1] logodds, cnp.uint8_t[:, ::1] touched,
                cnp.int64_t[:, ::1] stamp, long stamp_val,
                double px, double py,
                cnp.float64_t[::1] angles, cnp.float64_t[::1] ranges,
                cnp.uint8_t[::1] hits,
                double res, double l_hit, double l_miss, double l_clamp):
    cdef long h = logodds.shape[0]
    cdef long w = logodds.shape[1]
    cdef long n = angles.shape[0]
    cdef long max_cells = 8 * (h + w) * n  # generous bound
    cdef cnp.ndarray[cnp.int64_t, ndim=1] free_buf = np.empty(max_cells, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] occ_buf = np.empty(n, dtype=np.int64)
    cdef long n_free = 0, n_occ = 0
    cdef long r, ix, iy, step_x, step_y, idx
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t, t_next, end_dist
    cdef bint hit
    for r in range(n):
        end_dist = ranges[r]
        hit = hits[r] != 0
        _ray_setup(px, py, angles[r], res, &ix, &iy, &step_x, &step_y,
                   &t_max_x, &t_max_y, &t_delta_x, &t_delta_y)
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
                        occ_buf[n_occ] = idx
                        n_occ += 1
                        stamp[iy, ix] = stamp_val + 1
                    break
            elif t > end_dist:
                break
            if stamp[iy, ix] < stamp_val:
                free_buf[n_free] = iy * w + ix
                n_free += 1
                stamp[iy, ix] = stamp_val

    cdef cnp.ndarray[cnp.int64_t, ndim=1] changed = np.empty(n_free + n_occ, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] old = np.empty(n_free + n_occ, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] was_touched = np.empty(n_free + n_occ, dtype=np.uint8)
    cdef long n_changed = 0
    cdef long i, cy, cx
    cdef double old_l, new_l
    for i in range(n_occ):
        idx = occ_buf[i]
        cy = idx // w
        cx = idx - cy * w
        old_l = logodds[cy, cx]
        new_l = old_l + l_hit
        if new_l > l_clamp:
            new_l = l_clamp
        changed[n_changed] = idx
        old[n_changed] = old_l
        was_touched[n_changed] = touched[cy, cx]
        n_changed += 1
        logodds[cy, cx] = new_l
        touched[cy, cx] = 1
    for i in range(n_free):
        idx = free_buf[i]
        cy = idx // w
        cx = idx - cy * w
        if stamp[cy, cx] == stamp_val + 1:
            continue
        old_l = logodds[cy, cx]
        new_l = old_l + l_miss
        if new_l < -l_clamp:
            new_l = -l_clamp
        changed[n_changed] = idx
        old[n_changed] = old_l
        was_touched[n_changed] = touched[cy, cx]
        n_changed += 1
        logodds[cy, cx] = new_l
        touched[cy, cx] = 1
    return (changed[:n_changed].copy(), old[:n_changed].copy(),
            was_touched[:n_changed].copy())


def disc_visibility(cnp.uint8_t[:, ::1] block, double px, double py,
                    double d_thr, double res):
    cdef long h = block.shape[0]
    cdef long w = block.shape[1]
    cdef long ix0 = <long>floor((px - d_thr) / res)
    cdef long ix1 = <long>floor((px + d_thr) / res)
    cdef long iy0 = <long>floor((py - d_thr) / res)
    cdef long iy1 = <long>floor((py + d_thr) / res)
    if ix0 < 0: ix0 = 0
    if iy0 < 0: iy0 = 0
    if ix1 > w - 1: ix1 = w - 1
    if iy1 > h - 1: iy1 = h - 1
    cdef long pix = <long>floor(px / res)
    cdef long piy = <long>floor(py / res)

    cdef long cap = (ix1 - ix0 + 1) * (iy1 - iy0 + 1)
    if cap < 1:
        cap = 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx_out = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bearing_out = np.empty(cap, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist_out = np.empty(cap, dtype=np.float64)
    cdef long n_out = 0

    cdef long ix, iy, jx, jy, step_x, step_y
    cdef double cx, cy, dx, dy, dist, theta
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y
    cdef bint visible
    for iy in range(iy0, iy1 + 1):
        cy = (iy + 0.5) * res
        for ix in range(ix0, ix1 + 1):
            cx = (ix + 0.5) * res
            dx = cx - px
            dy = cy - py
            dist = sqrt(dx * dx + dy * dy)
            if dist > d_thr:
                continue
            if ix == pix and iy == piy:
                idx_out[n_out] = iy * w + ix
                bearing_out[n_out] = 0.0
                dist_out[n_out] = dist
                n_out += 1
                continue
            theta = atan2(dy, dx)
            _ray_setup(px, py, theta, res, &jx, &jy, &step_x, &step_y,
                       &t_max_x, &t_max_y, &t_delta_x, &t_delta_y)
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
                if t_max_x > dist + res and t_max_y > dist + res:
                    break
                if block[jy, jx]:
                    visible = False
                    break
            if visible:
                idx_out[n_out] = iy * w + ix
                bearing_out[n_out] = theta
                dist_out[n_out] = dist
                n_out += 1
    return idx_out[:n_out].copy(), bearing_out[:n_out].copy(), dist_out[:n_out].copy()


def segment_clear(cnp.uint8_t[:, ::1] occ, double x0, double y0,
                  double x1, double y1, double res):
    cdef long h = occ.shape[0]
    cdef long w = occ.shape[1]
    cdef double dist = sqrt((x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0))
    if dist < 1e-12:
        return True
    cdef long tx = <long>floor(x1 / res)
    cdef long ty = <long>floor(y1 / res)
    cdef double theta = atan2(y1 - y0, x1 - x0)
    cdef long ix, iy, step_x, step_y
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t
    _ray_setup(x0, y0, theta, res, &ix, &iy, &step_x, &step_y,
               &t_max_x, &t_max_y, &t_delta_x, &t_delta_y)
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


cdef inline double _wrap(double a) nogil:
    while a > M_PI:
        a -= 2.0 * M_PI
    while a <= -M_PI:
        a += 2.0 * M_PI
    return a


def nmpc_eval(cnp.float64_t[::1] s0, cnp.float64_t[:, ::1] U,
              cnp.float64_t[::1] target, cnp.float64_t[::1] qx,
              cnp.float64_t[::1] rdiag, double qobs,
              cnp.float64_t[:, :, ::1] obs, double dt,
              double d_min, double penalty_w, bint want_grad):
    cdef long N = U.shape[0]
    cdef long K = obs.shape[0]
    cdef double qx0 = qx[0], qx1 = qx[1], qx2 = qx[2]
    cdef double r0 = rdiag[0], r1 = rdiag[1], r2 = rdiag[2]
    cdef double wx = target[0], wy = target[1], wt = target[2]

    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.empty(N + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ys = np.empty(N + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ths = np.empty(N + 1)
    xs[0] = s0[0]
    ys[0] = s0[1]
    ths[0] = s0[2]

    cdef double J = 0.0
    cdef long n, k
    cdef double x, y, th, ex, ey, et, ux, uy, ut, tm, c, s
    cdef double dxo, dyo, d2, e, hk, d
    for n in range(N):
        x = xs[n]; y = ys[n]; th = ths[n]
        ex = x - wx
        ey = y - wy
        et = _wrap(th - wt)
        J += qx0 * ex * ex + qx1 * ey * ey + qx2 * et * et
        ux = U[n, 0]; uy = U[n, 1]; ut = U[n, 2]
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
            hk = exp(e) - 1.0
            J += qobs * hk * hk
            d = sqrt(d2)
            if d < d_min:
                J += penalty_w * (d_min - d) * (d_min - d)
        tm = th + 0.5 * dt * ut
        c = cos(tm)
        s = sin(tm)
        xs[n + 1] = x + dt * (ux * c - uy * s)
        ys[n + 1] = y + dt * (ux * s + uy * c)
        ths[n + 1] = th + dt * ut

    ex = xs[N] - wx
    ey = ys[N] - wy
    et = _wrap(ths[N] - wt)
    J += qx0 * ex * ex + qx1 * ey * ey + qx2 * et * et

    if not want_grad:
        return J, None

    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((N, 3))
    cdef double lx = 2.0 * qx0 * ex
    cdef double ly = 2.0 * qx1 * ey
    cdef double lt = 2.0 * qx2 * et
    cdef double dxdux, dxduy, dydux, dyduy, rot, rot2, gx, gy, gt
    cdef double nlx, nly, nlt, ee, dcost_dd2, dpen_dd
    cdef bint capped
    for n in range(N - 1, -1, -1):
        x = xs[n]; y = ys[n]; th = ths[n]
        ux = U[n, 0]; uy = U[n, 1]; ut = U[n, 2]
        tm = th + 0.5 * dt * ut
        c = cos(tm)
        s = sin(tm)
        dxdux = dt * c
        dxduy = -dt * s
        dydux = dt * s
        dyduy = dt * c
        rot = dt * (-ux * s - uy * c)
        rot2 = dt * (ux * c - uy * s)
        gx = lx * dxdux + ly * dydux + 2.0 * r0 * ux
        gy = lx * dxduy + ly * dyduy + 2.0 * r1 * uy
        gt = lx * rot * 0.5 * dt + ly * rot2 * 0.5 * dt + lt * dt + 2.0 * r2 * ut
        grad[n, 0] = gx
        grad[n, 1] = gy
        grad[n, 2] = gt
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
            ee = exp(e)
            hk = ee - 1.0
            if not capped:
                dcost_dd2 = qobs * 2.0 * hk * ee * (-0.1 / (d2 * d2))
                nlx += dcost_dd2 * 2.0 * dxo
                nly += dcost_dd2 * 2.0 * dyo
            d = sqrt(d2)
            if d < d_min and d > 1e-9:
                dpen_dd = -2.0 * penalty_w * (d_min - d)
                nlx += dpen_dd * dxo / d
                nly += dpen_dd * dyo / d
        lx = nlx
        ly = nly
        lt = nlt
    return J, grad
