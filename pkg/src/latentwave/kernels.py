"""Hot loops with a compiled backend and a pure numpy fallback.

The Cython extension ``latentwave._kernels`` is used when it was built and
``LATENTWAVE_PURE_PYTHON`` is unset; otherwise the numpy versions below run.
The leapfrog results are bit-identical; NCC sums agree to rounding.
"""
from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("LATENTWAVE_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def py_leapfrog_record(coef, damp, inj_ix, inj_iy, inj_src, inj_w, src_wave, rec_ix, rec_iy):
    """Damped 5-point leapfrog; records the field at ``rec_ix x rec_iy`` after every step.

    ``coef`` is ``(c dt / h)^2`` and ``damp`` is ``sigma dt / 2`` per cell.
    Injection point ``j`` adds ``inj_w[j] * src_wave[inj_src[j], n]`` to cell
    ``(inj_ix[j], inj_iy[j])`` at step ``n``.
    """
    nx, ny = coef.shape
    nsteps = src_wave.shape[1]
    prev = np.zeros((nx, ny))
    cur = np.zeros((nx, ny))
    out = np.empty((nsteps, len(rec_ix), len(rec_iy)))
    a = 1.0 / (1.0 + damp)
    b = 1.0 - damp
    rec = np.ix_(rec_ix, rec_iy)
    inner = (slice(1, -1), slice(1, -1))
    for n in range(nsteps):
        lap = cur[2:, 1:-1] + cur[:-2, 1:-1]
        lap = lap + cur[1:-1, 2:]
        lap = lap + cur[1:-1, :-2]
        lap = lap - 4.0 * cur[inner]
        nxt = np.zeros((nx, ny))
        nxt[inner] = (2.0 * cur[inner] - b[inner] * prev[inner] + coef[inner] * lap) * a[inner]
        np.add.at(nxt, (inj_ix, inj_iy), inj_w * src_wave[inj_src, n])
        prev, cur = cur, nxt
        out[n] = cur[rec]
    return out


def py_ncc_scan(traces, ref, K):
    """Normalized multichannel cross-correlation over lags ``-K..K``.

    ``traces`` is ``[P, C, T]``, ``ref`` is ``[C, T]``; returns ``[P, 2K+1]``
    using only the valid overlap of each lag.
    """
    P, C, T = traces.shape
    rho = np.zeros((P, 2 * K + 1))
    for ki, k in enumerate(range(-K, K + 1)):
        if k >= 0:
            u = traces[:, :, k:T]
            r = ref[:, 0:T - k]
        else:
            u = traces[:, :, 0:T + k]
            r = ref[:, -k:T]
        num = np.einsum("pct,ct->p", u, r)
        er = float(np.sum(r * r))
        eu = np.einsum("pct,pct->p", u, u)
        ok = (eu > 0) & (er > 0)
        rho[ok, ki] = num[ok] / np.sqrt(er * eu[ok])
    return rho


def _prep_leapfrog(coef, damp, inj_ix, inj_iy, inj_src, inj_w, src_wave, rec_ix, rec_iy):
    f = lambda a: np.ascontiguousarray(a, dtype=np.float64)
    i = lambda a: np.ascontiguousarray(a, dtype=np.int64)
    return (f(coef), f(damp), i(inj_ix), i(inj_iy), i(inj_src), f(inj_w),
            f(np.atleast_2d(src_wave)), i(rec_ix), i(rec_iy))


def leapfrog_record(coef, damp, inj_ix, inj_iy, inj_src, inj_w, src_wave, rec_ix, rec_iy):
    args = _prep_leapfrog(coef, damp, inj_ix, inj_iy, inj_src, inj_w, src_wave, rec_ix, rec_iy)
    if _compiled is not None:
        return _compiled.leapfrog_record(*args)
    return py_leapfrog_record(*args)


def ncc_scan(traces, ref, K: int):
    traces = np.ascontiguousarray(traces, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    if _compiled is not None:
        return _compiled.ncc_scan(traces, ref, int(K))
    return py_ncc_scan(traces, ref, int(K))
