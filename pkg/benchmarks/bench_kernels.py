"""Benchmark the compiled kernel extension against the pure-Python
fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from scoutsim.kernels import _py

try:
    from scoutsim.kernels import _core
except ImportError:
    _core = None


def _world(n=120, seed=0):
    rng = np.random.default_rng(seed)
    occ = np.zeros((n, n), dtype=np.uint8)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = 1
    for _ in range(12):
        x, y = rng.integers(10, n - 20, 2)
        occ[y:y + 6, x:x + 6] = 1
    return occ


def bench(label, fn_py, fn_c, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        fn_py()
    t_py = (time.perf_counter() - t0) / reps
    if fn_c is None:
        print(f"{label:<18} pure {t_py * 1e3:8.3f} ms   compiled      n/a")
        return
    t0 = time.perf_counter()
    for _ in range(reps):
        fn_c()
    t_c = (time.perf_counter() - t0) / reps
    print(f"{label:<18} pure {t_py * 1e3:8.3f} ms   compiled "
          f"{t_c * 1e3:8.3f} ms   speedup {t_py / t_c:6.1f}x")


def main():
    occ = _world()
    res = 0.1
    px = py_ = 6.0
    fov = np.radians(69.4)
    angles = -0.5 * fov + fov * np.arange(87) / 86.0
    ranges_py, hits_py = _py.cast_scan(occ, px, py_, 0.3, fov, 87, 4.0, res)

    print(f"backends: pure python{' + compiled' if _core else ' only'}")

    bench("cast_scan",
          lambda: _py.cast_scan(occ, px, py_, 0.3, fov, 87, 4.0, res),
          (lambda: _core.cast_scan(occ, px, py_, 0.3, fov, 87, 4.0, res))
          if _core else None, 20)

    def make_update(mod):
        logodds = np.zeros((120, 120))
        touched = np.zeros((120, 120), dtype=np.uint8)
        stamp = np.zeros((120, 120), dtype=np.int64)

        def run():
            mod.update_scan(logodds, touched, stamp, 2, px, py_,
                            angles + 0.3, ranges_py, hits_py, res,
                            0.85, -0.4, 3.5)
        return run

    bench("update_scan", make_update(_py),
          make_update(_core) if _core else None, 20)

    bench("disc_visibility",
          lambda: _py.disc_visibility(occ, px, py_, 4.0, res),
          (lambda: _core.disc_visibility(occ, px, py_, 4.0, res))
          if _core else None, 5)

    s0 = np.array([6.0, 6.0, 0.0])
    U = np.full((20, 3), 0.3)
    target = np.array([8.0, 6.0, 1.0])
    qx = np.array([5.0, 5.0, 2.0])
    r = np.full(3, 0.5)
    obs = np.tile(np.array([[7.0, 6.4]]), (3, 20, 1))

    bench("nmpc_eval",
          lambda: _py.nmpc_eval(s0, U, target, qx, r, 1.0, obs, 0.1, 0.25,
                                200.0, True),
          (lambda: _core.nmpc_eval(s0, U, target, qx, r, 1.0, obs, 0.1, 0.25,
                                   200.0, True)) if _core else None, 50)


if __name__ == "__main__":
    main()
