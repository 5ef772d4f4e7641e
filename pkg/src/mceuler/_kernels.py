"""Hot numerical loops: a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the MCEULER_KERNELS
environment variable: "numba" forces the compiled path (and raises if
numba is unavailable), "numpy" forces the fallback, "auto" (the
default) uses numba when it imports cleanly.

Both backends must perform the same floating-point operations in the
same order so that results are bit-identical between them.  That is why
transcendentals (exp, the normal inverse CDF) are evaluated with
numpy/scipy *outside* the kernels, why the jit decorators avoid
fastmath, and why the update expressions below are written identically
in both variants.  Keep the model arithmetic here textually in sync
with the order-0 coefficient callables in models.py.
"""

from __future__ import annotations

import os

import numpy as np

# Integer ids for models with a compiled fast path.  Models without an
# id run through the generic per-step numpy loop instead.
KIND_CUBIC = 0
KIND_GINZBURG_LANDAU = 1
KIND_GBM = 2

_BACKEND = os.environ.get("MCEULER_KERNELS", "auto").strip().lower()
if _BACKEND not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        "MCEULER_KERNELS must be one of auto|numba|numpy, got %r" % _BACKEND
    )

HAS_NUMBA = False
if _BACKEND != "numpy":
    try:
        import warnings

        import numba

        # stale-TBB advisory from the parallel runtime probe; the
        # workqueue fallback it announces is exactly what we get
        warnings.filterwarnings("ignore", message=".*TBB.*", category=Warning)
        HAS_NUMBA = True
    except ImportError:
        if _BACKEND == "numba":
            raise

USING_NUMBA = HAS_NUMBA and _BACKEND != "numpy"


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"


def set_worker_threads(n: int) -> int:
    """Clamp n to the numba thread pool size and apply it.

    Returns the thread count actually in effect.  The numpy backend is
    single-threaded at this level, so the request is ignored there.
    Thread count never changes results: all reductions happen outside
    the kernels in a fixed order.
    """
    if not USING_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    eff = max(1, min(int(n), limit))
    numba.set_num_threads(eff)
    return eff


def _euler_terminal_impl(kind, c1, c2, dt, xi, incs, out):
    # out[r] = Y_N for replicate r.  Expressions mirror models.py.
    # Rows are independent, so the parallel build partitions r without
    # touching per-row arithmetic: results do not depend on threads.
    n_rep, n_steps = incs.shape
    for r in _prange(n_rep):
        y = xi[r]
        for n in range(n_steps):
            dw = incs[r, n]
            if kind == KIND_CUBIC:
                mu = -(y * y * y)
                y = y + dt * mu + c1 * dw
            elif kind == KIND_GINZBURG_LANDAU:
                mu = 0.5 * y - y * y * y
                y = y + dt * mu + y * dw
            else:
                mu = c1 * y
                y = y + dt * mu + (c2 * y) * dw
        out[r] = y


def _euler_values_impl(kind, c1, c2, dt, xi, incs, out):
    # out[r, n] = Y_n; out has one more column than incs.
    n_rep, n_steps = incs.shape
    for r in _prange(n_rep):
        y = xi[r]
        out[r, 0] = y
        for n in range(n_steps):
            dw = incs[r, n]
            if kind == KIND_CUBIC:
                mu = -(y * y * y)
                y = y + dt * mu + c1 * dw
            elif kind == KIND_GINZBURG_LANDAU:
                mu = 0.5 * y - y * y * y
                y = y + dt * mu + y * dw
            else:
                mu = c1 * y
                y = y + dt * mu + (c2 * y) * dw
            out[r, n + 1] = y


def _omega_flags_impl(ealpha, sbeta, base, radius, out):
    # out[r] = True iff every |D_{v,w}| for 0 <= v <= w <= n_steps stays
    # within radius, where D is advanced by D <- ealpha[w]*D + sbeta[w]
    # from the start value base[r].  The comparison is written so that a
    # NaN dominator fails the event.
    n_rep, n_steps = ealpha.shape
    for r in _prange(n_rep):
        ok = base[r] <= radius
        v = 0
        while ok and v <= n_steps:
            d = base[r]
            w = v
            while w < n_steps:
                d = ealpha[r, w] * d + sbeta[r, w]
                if not (abs(d) <= radius):
                    ok = False
                    break
                w += 1
            v += 1
        out[r] = ok


if USING_NUMBA:
    _prange = numba.prange
    _jit = numba.njit(cache=True, fastmath=False, parallel=True)
    _euler_terminal_fast = _jit(_euler_terminal_impl)
    _euler_values_fast = _jit(_euler_values_impl)
    _omega_flags_fast = _jit(_omega_flags_impl)
else:
    _prange = range


def _euler_terminal_numpy(kind, c1, c2, dt, xi, incs, out):
    # Vectorized across replicates, stepping in time.  Per-element
    # arithmetic matches the scalar loops above exactly.
    y = xi.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(incs.shape[1]):
            dw = incs[:, n]
            if kind == KIND_CUBIC:
                mu = -(y * y * y)
                y = y + dt * mu + c1 * dw
            elif kind == KIND_GINZBURG_LANDAU:
                mu = 0.5 * y - y * y * y
                y = y + dt * mu + y * dw
            else:
                mu = c1 * y
                y = y + dt * mu + (c2 * y) * dw
    out[:] = y


def _euler_values_numpy(kind, c1, c2, dt, xi, incs, out):
    y = xi.copy()
    out[:, 0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(incs.shape[1]):
            dw = incs[:, n]
            if kind == KIND_CUBIC:
                mu = -(y * y * y)
                y = y + dt * mu + c1 * dw
            elif kind == KIND_GINZBURG_LANDAU:
                mu = 0.5 * y - y * y * y
                y = y + dt * mu + y * dw
            else:
                mu = c1 * y
                y = y + dt * mu + (c2 * y) * dw
            out[:, n + 1] = y


def _omega_flags_numpy(ealpha, sbeta, base, radius, out):
    # Same AND over all (v, w) pairs as the scalar early-exit version:
    # once a lane fails it stays failed, and inf/NaN dominators compare
    # False against radius, so dead lanes cannot resurrect.
    n_rep, n_steps = ealpha.shape
    ok = base <= radius
    with np.errstate(over="ignore", invalid="ignore"):
        for v in range(n_steps):
            if not ok.any():
                break
            d = base.copy()
            for w in range(v, n_steps):
                d = ealpha[:, w] * d + sbeta[:, w]
                ok &= np.abs(d) <= radius
    out[:] = ok


def euler_terminal_batch(kind, c1, c2, dt, xi, incs):
    """Terminal Euler values for a batch of replicates.

    incs: (R, N) float64 Brownian increments, xi: (R,) start values.
    Overflow saturates to inf/NaN without trapping; callers treat
    non-finite output as a diverged replicate.
    """
    out = np.empty(incs.shape[0], dtype=np.float64)
    if USING_NUMBA:
        _euler_terminal_fast(kind, c1, c2, dt, xi, incs, out)
    else:
        _euler_terminal_numpy(kind, c1, c2, dt, xi, incs, out)
    return out


def euler_values_batch(kind, c1, c2, dt, xi, incs):
    """Full Euler trajectories, shape (R, N+1), column 0 = xi."""
    out = np.empty((incs.shape[0], incs.shape[1] + 1), dtype=np.float64)
    if USING_NUMBA:
        _euler_values_fast(kind, c1, c2, dt, xi, incs, out)
    else:
        _euler_values_numpy(kind, c1, c2, dt, xi, incs, out)
    return out


def omega_flags_batch(ealpha, sbeta, base, radius):
    """Event membership flags from per-step dominator factors.

    ealpha: (R, N) exp(alpha_n) factors, sbeta: (R, N) sgn(Y_n)*beta_n
    terms, base: (R,) start value of every restarted recursion.  Flag r
    is True iff sup over all window pairs |D_{v,w}| <= radius.
    """
    out = np.empty(ealpha.shape[0], dtype=np.bool_)
    if USING_NUMBA:
        _omega_flags_fast(ealpha, sbeta, base, float(radius), out)
    else:
        _omega_flags_numpy(ealpha, sbeta, base, float(radius), out)
    return out
