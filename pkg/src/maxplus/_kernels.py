"""Hot numeric kernels, JIT-compiled with a pure-numpy twin.

The inner loops that dominate runtime (dense max-plus matrix action and
the linear-time conjugate transform) exist in two bit-identical
implementations:

* a numba ``@njit`` version (parallel over output rows), and
* a pure-numpy fallback.

Selection is controlled by the environment variable ``MAXPLUS_BACKEND``:

* ``auto`` (default): numba if it imports, numpy otherwise;
* ``numba``: require numba, raise if unavailable;
* ``numpy``: force the fallback (useful for debugging and benchmarks).

Both paths evaluate every term with the same floating-point expression,
so results agree bit for bit; ``benchmarks/bench_kernels.py`` compares
their speed.

Conventions: values are float64 where -inf is the max-plus zero and is
absorbing for addition; kernels never contain +inf; no NaN ever enters
(callers validate).
"""

import os

import numpy as np

_CHUNK_ROWS = 256  # numpy fallback materialises at most this many table rows

_flag = os.environ.get("MAXPLUS_BACKEND", "auto").strip().lower()
if _flag not in ("auto", "numba", "numpy"):
    raise ValueError(f"MAXPLUS_BACKEND must be auto|numba|numpy, got {_flag!r}")

if _flag in ("auto", "numba"):
    try:
        import numba as _nb

        HAVE_NUMBA = True
    except ImportError:
        if _flag == "numba":
            raise
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _flag != "numpy"


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _np_matvec_table(table, neg_f):
    """Row-wise max of table[i, j] + neg_f[j] with -inf absorbing."""
    nx = table.shape[0]
    out = np.empty(nx)
    for lo in range(0, nx, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, nx)
        with np.errstate(invalid="ignore"):
            t = table[lo:hi] + neg_f[None, :]
        # -inf entries meeting +inf in neg_f give NaN; the convention is -inf
        t[np.isnan(t)] = -np.inf
        out[lo:hi] = t.max(axis=1)
    return out


def _np_matvec_bilinear(x, y, neg_f):
    """Row-wise max of x[i]*y[j] + neg_f[j]; products are always finite."""
    nx = x.shape[0]
    out = np.empty(nx)
    for lo in range(0, nx, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, nx)
        t = np.multiply.outer(x[lo:hi], y) + neg_f[None, :]
        out[lo:hi] = t.max(axis=1)
    return out


def _np_matvec_bilinear_2d(x0, x1, y0, y1, neg_f):
    """Like bilinear but b = x0*y0 + x1*y1 (fixed evaluation order)."""
    nx = x0.shape[0]
    out = np.empty(nx)
    for lo in range(0, nx, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, nx)
        t = np.multiply.outer(x0[lo:hi], y0) + np.multiply.outer(x1[lo:hi], y1)
        t += neg_f[None, :]
        out[lo:hi] = t.max(axis=1)
    return out


def _np_envelope_merge(slopes, icepts, xs):
    """Upper envelope of finite lines x -> x*s + c, evaluated on sorted xs.

    ``slopes`` must be strictly increasing.  Near crossing points the
    pointer may lag by one line because of rounding, so the value at each
    x is the max over the current hull line and its two hull neighbours;
    every candidate is evaluated with the same expression the dense path
    uses (fl(x*s) + c).
    """
    m = slopes.shape[0]
    keep = np.empty(m, dtype=np.int64)
    k = 0
    for j in range(m):
        sj = slopes[j]
        cj = icepts[j]
        if k > 0 and slopes[keep[k - 1]] == sj:
            if icepts[keep[k - 1]] >= cj:
                continue
            k -= 1
        while k >= 2:
            a = keep[k - 2]
            b = keep[k - 1]
            # line b never strictly wins if its crossing with a is at or
            # past its crossing with j
            if (icepts[a] - icepts[b]) * (sj - slopes[b]) >= (icepts[b] - cj) * (slopes[b] - slopes[a]):
                k -= 1
            else:
                break
        keep[k] = j
        k += 1

    out = np.empty(xs.shape[0])
    p = 0
    for i in range(xs.shape[0]):
        x = xs[i]
        while p + 1 < k and x * slopes[keep[p + 1]] + icepts[keep[p + 1]] >= x * slopes[keep[p]] + icepts[keep[p]]:
            p += 1
        best = x * slopes[keep[p]] + icepts[keep[p]]
        if p > 0:
            v = x * slopes[keep[p - 1]] + icepts[keep[p - 1]]
            if v > best:
                best = v
        if p + 1 < k:
            v = x * slopes[keep[p + 1]] + icepts[keep[p + 1]]
            if v > best:
                best = v
        out[i] = best
    return out


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if USE_NUMBA:
    _njit = _nb.njit(cache=True)
    _pnjit = _nb.njit(cache=True, parallel=True)

    @_pnjit
    def _nb_matvec_table(table, neg_f):
        nx, ny = table.shape
        out = np.empty(nx)
        for i in _nb.prange(nx):
            m = -np.inf
            for j in range(ny):
                b = table[i, j]
                t = -np.inf if b == -np.inf else b + neg_f[j]
                if t > m:
                    m = t
            out[i] = m
        return out

    @_pnjit
    def _nb_matvec_bilinear(x, y, neg_f):
        nx = x.shape[0]
        ny = y.shape[0]
        out = np.empty(nx)
        for i in _nb.prange(nx):
            xi = x[i]
            m = -np.inf
            for j in range(ny):
                t = xi * y[j] + neg_f[j]
                if t > m:
                    m = t
            out[i] = m
        return out

    @_pnjit
    def _nb_matvec_bilinear_2d(x0, x1, y0, y1, neg_f):
        nx = x0.shape[0]
        ny = y0.shape[0]
        out = np.empty(nx)
        for i in _nb.prange(nx):
            a0 = x0[i]
            a1 = x1[i]
            m = -np.inf
            for j in range(ny):
                t = a0 * y0[j] + a1 * y1[j] + neg_f[j]
                if t > m:
                    m = t
            out[i] = m
        return out

    @_njit
    def _nb_envelope_merge(slopes, icepts, xs):
        m = slopes.shape[0]
        keep = np.empty(m, dtype=np.int64)
        k = 0
        for j in range(m):
            sj = slopes[j]
            cj = icepts[j]
            if k > 0 and slopes[keep[k - 1]] == sj:
                if icepts[keep[k - 1]] >= cj:
                    continue
                k -= 1
            while k >= 2:
                a = keep[k - 2]
                b = keep[k - 1]
                if (icepts[a] - icepts[b]) * (sj - slopes[b]) >= (icepts[b] - cj) * (slopes[b] - slopes[a]):
                    k -= 1
                else:
                    break
            keep[k] = j
            k += 1

        out = np.empty(xs.shape[0])
        p = 0
        for i in range(xs.shape[0]):
            x = xs[i]
            while p + 1 < k and x * slopes[keep[p + 1]] + icepts[keep[p + 1]] >= x * slopes[keep[p]] + icepts[keep[p]]:
                p += 1
            best = x * slopes[keep[p]] + icepts[keep[p]]
            if p > 0:
                v = x * slopes[keep[p - 1]] + icepts[keep[p - 1]]
                if v > best:
                    best = v
            if p + 1 < k:
                v = x * slopes[keep[p + 1]] + icepts[keep[p + 1]]
                if v > best:
                    best = v
            out[i] = best
        return out

    matvec_table = _nb_matvec_table
    matvec_bilinear = _nb_matvec_bilinear
    matvec_bilinear_2d = _nb_matvec_bilinear_2d
    envelope_merge = _nb_envelope_merge
else:
    matvec_table = _np_matvec_table
    matvec_bilinear = _np_matvec_bilinear
    matvec_bilinear_2d = _np_matvec_bilinear_2d
    envelope_merge = _np_envelope_merge


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n):
    """Limit JIT parallelism; no-op on the numpy backend."""
    if USE_NUMBA:
        _nb.set_num_threads(max(1, int(n)))
