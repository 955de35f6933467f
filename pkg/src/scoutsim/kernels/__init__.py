"""Kernel backend selection.

Imports the compiled extension when available, otherwise falls back to
the pure-Python reference implementation. Set SCOUTSIM_PURE=1 to force
the fallback (used by the benchmark and the parity tests).
"""

import os

if os.environ.get("SCOUTSIM_PURE") == "1":
    from scoutsim.kernels import _py as _impl
else:
    try:
        from scoutsim.kernels import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from scoutsim.kernels import _py as _impl

BACKEND = _impl.BACKEND
trace_ray = _impl.trace_ray
cast_scan = _impl.cast_scan
update_scan = _impl.update_scan
disc_visibility = _impl.disc_visibility
segment_clear = _impl.segment_clear
nmpc_eval = _impl.nmpc_eval
