"""Jitted inner loops.

These are the only sequential hot paths in the package: the in-place sign
transform (iterated up to a few thousand times per walk), the triangular
codec recursions, and the level-crossing scan over fine Brownian grids.
Everything else is vectorized numpy. All kernels are nopython, nogil, and
cached on disk so repeat runs skip compilation.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def cv_pass(x, m):
    """One transform application on x[:m], written in place into x[:m-1].

    x holds +-1 steps. The new step j-1 is sign(S_{j-1}+S_j) * x[j]; the
    running sums track positions so no extra array is needed. Returns m-1.
    """
    s_prev = 0
    s = x[0]
    for j in range(1, m):
        xj = x[j]
        if s_prev + s > 0:
            x[j - 1] = xj
        else:
            x[j - 1] = -xj
        s_prev = s
        s += xj
    return m - 1


@njit(cache=True, nogil=True)
def iterate_cv(steps, h):
    """h-fold transform of a +-1 step array; returns the shortened array."""
    x = steps.copy()
    m = x.shape[0]
    for _ in range(h):
        m = cv_pass(x, m)
    return x[:m].copy()


@njit(cache=True, nogil=True)
def encode_signs(steps):
    """First step of each iterated transform: code[k] = T^k(S)_1."""
    n = steps.shape[0]
    code = np.empty(n, np.int8)
    x = steps.copy()
    m = n
    for k in range(n):
        code[k] = x[0]
        m = cv_pass(x, m)
    return code


@njit(cache=True, nogil=True)
def inverse_pass(tsteps, m, s1, out):
    """Inverse of one transform application.

    Writes into out[:m+1] the unique +-1 step sequence whose transform is
    tsteps[:m] and whose first step is s1.
    """
    out[0] = s1
    s_prev = 0
    s = s1
    for j in range(1, m + 1):
        if s_prev + s > 0:
            step = tsteps[j - 1]
        else:
            step = -tsteps[j - 1]
        out[j] = step
        s_prev = s
        s += step
    return m + 1


@njit(cache=True, nogil=True)
def decode_signs(code):
    """Triangular reconstruction of the path from its sign code.

    Grows a path of length 1 (last code entry) by one inverse pass per
    remaining entry, O(n^2) total.
    """
    n = code.shape[0]
    cur = np.empty(n, np.int8)
    nxt = np.empty(n, np.int8)
    if n == 0:
        return cur[:0].copy()
    cur[0] = code[n - 1]
    m = 1
    for k in range(n - 2, -1, -1):
        m = inverse_pass(cur, m, code[k], nxt)
        tmp = cur
        cur = nxt
        nxt = tmp
    return cur[:m].copy()


@njit(cache=True, nogil=True)
def embed_scan(values, delta):
    """First-passage scan of a grid against snapped levels spaced delta.

    Tracks the integer level count m (level = m * delta, starting at 0).
    A hit is the first grid index whose value is >= one level above or
    <= one level below; the level then snaps by exactly one, so at most
    one hit is recorded per grid point and overshoot never accumulates.
    Returns (hit indices, +-1 crossing signs).
    """
    npts = values.shape[0]
    idx = np.empty(npts, np.int64)
    sgn = np.empty(npts, np.int8)
    m = 0
    cnt = 0
    for i in range(1, npts):
        d = values[i] - m * delta
        if d >= delta:
            m += 1
            idx[cnt] = i
            sgn[cnt] = 1
            cnt += 1
        elif d <= -delta:
            m -= 1
            idx[cnt] = i
            sgn[cnt] = -1
            cnt += 1
    return idx[:cnt].copy(), sgn[:cnt].copy()
