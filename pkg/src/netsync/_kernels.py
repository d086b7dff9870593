"""Hot integration kernels: numba-jitted with a pure-numpy fallback.

The closed networked loop is one autonomous linear system, so the whole
simulation cost is the fixed-step scan below.  The numba path is selected by
default; set ``NETSYNC_NO_NUMBA=1`` in the environment (or install without
numba) to force the numpy fallback.  ``benchmarks/bench_kernels.py`` compares
the two.  Both backends are deterministic; results agree to rounding.

Kernels return -1 on success or the index of the first sample at which the
state became non-finite or exceeded ``limit``.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("NETSYNC_NO_NUMBA", "0") == "1"


def rk4_scan_numpy(a, x0, dt, n_steps, out, limit):
    """Classical 4th-order fixed-step scan of x' = a x, recording each step."""
    x = x0.astype(np.float64).copy()
    out[0, :] = x
    for k in range(n_steps):
        k1 = a @ x
        k2 = a @ (x + (0.5 * dt) * k1)
        k3 = a @ (x + (0.5 * dt) * k2)
        k4 = a @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[k + 1, :] = x
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > limit:
            return k + 1
    return -1


def step_scan_numpy(phi, x0, out, limit):
    """Propagate x_{k+1} = phi x_k, recording each step (exact stepping
    when phi is the matrix exponential of a dt)."""
    n_steps = out.shape[0] - 1
    x = x0.astype(np.float64).copy()
    out[0, :] = x
    for k in range(n_steps):
        x = phi @ x
        out[k + 1, :] = x
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > limit:
            return k + 1
    return -1


try:  # pragma: no cover - import guard
    if NUMBA_DISABLED:
        raise ImportError("numba disabled via NETSYNC_NO_NUMBA")
    from numba import njit

    @njit(cache=True)
    def rk4_scan_numba(a, x0, dt, n_steps, out, limit):
        n = x0.shape[0]
        x = x0.copy()
        out[0, :] = x
        for k in range(n_steps):
            k1 = a @ x
            k2 = a @ (x + (0.5 * dt) * k1)
            k3 = a @ (x + (0.5 * dt) * k2)
            k4 = a @ (x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            out[k + 1, :] = x
            bad = False
            for i in range(n):
                v = x[i]
                if not np.isfinite(v) or abs(v) > limit:
                    bad = True
            if bad:
                return k + 1
        return -1

    @njit(cache=True)
    def step_scan_numba(phi, x0, out, limit):
        n = x0.shape[0]
        n_steps = out.shape[0] - 1
        x = x0.copy()
        out[0, :] = x
        for k in range(n_steps):
            x = phi @ x
            out[k + 1, :] = x
            bad = False
            for i in range(n):
                v = x[i]
                if not np.isfinite(v) or abs(v) > limit:
                    bad = True
            if bad:
                return k + 1
        return -1

    rk4_scan = rk4_scan_numba
    step_scan = step_scan_numba
    USING_NUMBA = True
except ImportError:  # pragma: no cover
    rk4_scan_numba = None
    step_scan_numba = None
    rk4_scan = rk4_scan_numpy
    step_scan = step_scan_numpy
    USING_NUMBA = False


def backend_name():
    return "numba" if USING_NUMBA else "numpy"
