"""Compiled hot loops.

One kernel lives here: the streaming autocorrelation power sum used by
the univariate |E|^(4t) moments.  It never materializes the full
difference array; pairs are enumerated per difference window with a
scratch buffer sized to the differences actually hit, so memory stays
O(chunk) while the arithmetic is exact int64.  The window decomposition
only reorders integer additions, so the result is independent of the
chunk size.
"""

import os

import numpy as np
import numba
from numba import njit, prange

# the workqueue layer is always built; tbb/omp availability varies and
# numba warns loudly when they are too old.  Respect an explicit choice.
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

# refuse int64 accumulation once the float shadow passes 2^62; the
# shadow's relative error is ~1e-12, far inside the 2x headroom to wrap
_SHADOW_LIMIT = float(2 ** 62)


@njit(cache=True, parallel=True)
def autocorr_sq_sum(u, w, chunk_cells):
    """(sum over m > 0 of d(m)^2, sum over pairs i < j of w_i w_j, flag)
    for d(m) = sum of w[i] * w[j] over pairs with u[j] - u[i] = m.

    u must be strictly increasing int64.  The caller guarantees that
    every partial d(m) fits int64 (sum of w^2 < 2^62 suffices); the
    returned flag is nonzero when the squared sum itself cannot be
    trusted in int64, judged by a float64 shadow accumulator.
    """
    n = u.shape[0]
    span = u[n - 1] - u[0]
    nchunks = (span + chunk_cells - 1) // chunk_cells
    total = np.int64(0)
    pair_sum = np.int64(0)
    shadow = 0.0
    for c in prange(nchunks):
        lo = 1 + c * chunk_cells  # differences m in [lo, hi)
        hi = lo + chunk_cells
        # counting pass: window sizes and touched difference range,
        # via two moving pointers (u sorted makes both monotone in i)
        jlo = 0
        jhi = 0
        pairs = np.int64(0)
        dmin = hi
        dmax = lo - 1
        for i in range(n):
            tlo = u[i] + lo
            thi = u[i] + hi
            while jlo < n and u[jlo] < tlo:
                jlo += 1
            if jhi < jlo:
                jhi = jlo
            while jhi < n and u[jhi] < thi:
                jhi += 1
            if jhi > jlo:
                pairs += jhi - jlo
                d = u[jlo] - u[i]
                if d < dmin:
                    dmin = d
                d = u[jhi - 1] - u[i]
                if d > dmax:
                    dmax = d
        if pairs == 0:
            continue
        buf = np.zeros(dmax - dmin + 1, dtype=np.int64)
        jlo = 0
        jhi = 0
        psum = np.int64(0)
        for i in range(n):
            base = u[i]
            tlo = base + lo
            thi = base + hi
            while jlo < n and u[jlo] < tlo:
                jlo += 1
            if jhi < jlo:
                jhi = jlo
            while jhi < n and u[jhi] < thi:
                jhi += 1
            wi = w[i]
            off = base + dmin
            for j in range(jlo, jhi):
                ww = wi * w[j]
                buf[u[j] - off] += ww
                psum += ww
        part = np.int64(0)
        fpart = 0.0
        for k in range(buf.shape[0]):
            v = buf[k]
            part += v * v
            fv = float(v)
            fpart += fv * fv
        total += part
        pair_sum += psum
        shadow += fpart
    flag = np.int64(1) if shadow > _SHADOW_LIMIT else np.int64(0)
    return total, pair_sum, flag
