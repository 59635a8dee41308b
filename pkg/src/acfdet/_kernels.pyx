# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: soft-cascade sliding-window scan and the weighted
best-stump search used by depth-2 tree training.

The pure-Python fallback in ``_kernels_py`` implements the same contracts
with identical floating-point accumulation order; results are bit-identical.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def best_stump(const cnp.uint8_t[:, ::1] Q, const double[::1] w, const cnp.int8_t[::1] y,
               const cnp.int64_t[::1] idx, int nbins):
    """Best weighted decision stump over quantized features.

    Considers splits "bin <= b" for b in [0, nbins-2], each side predicting
    its weighted-majority class; returns (feature, bin, error) minimizing the
    weighted misclassification, ties broken by lowest feature then lowest bin.
    """
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t d = Q.shape[1]
    cdef cnp.ndarray[double, ndim=2] hp_arr = np.zeros((d, nbins), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] hn_arr = np.zeros((d, nbins), dtype=np.float64)
    cdef double[:, ::1] hp = hp_arr
    cdef double[:, ::1] hn = hn_arr
    cdef cnp.ndarray[double, ndim=1] rp_arr = np.empty(nbins, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rn_arr = np.empty(nbins, dtype=np.float64)
    cdef double[::1] rp = rp_arr
    cdef double[::1] rn = rn_arr
    cdef Py_ssize_t i, f, b, row
    cdef double wi

    with nogil:
        for i in range(n):
            row = idx[i]
            wi = w[row]
            if y[row] > 0:
                for f in range(d):
                    hp[f, Q[row, f]] += wi
            else:
                for f in range(d):
                    hn[f, Q[row, f]] += wi

    cdef double best_err = np.inf
    cdef Py_ssize_t best_f = 0, best_b = 0
    cdef double lp, ln, el, er, err

    # Right-side sums come from a top-down suffix scan per feature so the
    # floating-point accumulation order matches the numpy fallback exactly.
    with nogil:
        for f in range(d):
            rp[nbins - 1] = hp[f, nbins - 1]
            rn[nbins - 1] = hn[f, nbins - 1]
            for b in range(nbins - 2, -1, -1):
                rp[b] = rp[b + 1] + hp[f, b]
                rn[b] = rn[b + 1] + hn[f, b]
            lp = 0.0
            ln = 0.0
            for b in range(nbins - 1):
                lp += hp[f, b]
                ln += hn[f, b]
                el = lp if lp < ln else ln
                er = rp[b + 1] if rp[b + 1] < rn[b + 1] else rn[b + 1]
                err = el + er
                if err < best_err:
                    best_err = err
                    best_f = f
                    best_b = b

    return int(best_f), int(best_b), float(best_err)


def cascade_scan(const double[:, :, ::1] F,
                 const cnp.int32_t[:, ::1] tc, const cnp.int32_t[:, ::1] ty, const cnp.int32_t[:, ::1] tx,
                 const double[:, ::1] thr, const double[:, ::1] leaf, const double[::1] stage_thr,
                 int window, int stride, bint early_exit=True):
    """Evaluate a soft cascade at every grid-aligned window of a channel stack.

    F is (C, H, W); trees are given as per-node (channel, row, col) feature
    coordinates, node thresholds, and alpha-scaled leaf outputs (the leaf sign
    is the weak classifier's vote).  Returns (score, trees_evaluated,
    positive_votes, passed) arrays over the window grid.

    With early_exit disabled every tree is evaluated, but the stage
    thresholds still decide the passed flag, so the full-pass set is
    identical either way.
    """
    cdef Py_ssize_t H = F.shape[1]
    cdef Py_ssize_t W = F.shape[2]
    cdef Py_ssize_t T = tc.shape[0]
    cdef Py_ssize_t ny = (H - window) // stride + 1 if H >= window else 0
    cdef Py_ssize_t nx = (W - window) // stride + 1 if W >= window else 0

    cdef cnp.ndarray[double, ndim=2] score = np.zeros((ny, nx), dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] ntrees = np.zeros((ny, nx), dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] votes = np.zeros((ny, nx), dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] passed = np.zeros((ny, nx), dtype=np.uint8)
    cdef double[:, ::1] score_v = score
    cdef cnp.int32_t[:, ::1] ntrees_v = ntrees
    cdef cnp.int32_t[:, ::1] votes_v = votes
    cdef cnp.uint8_t[:, ::1] passed_v = passed

    cdef Py_ssize_t iy, ix, wy, wx, t, node
    cdef double v, out, s
    cdef bint rejected

    with nogil:
        for iy in range(ny):
            wy = iy * stride
            for ix in range(nx):
                wx = ix * stride
                s = 0.0
                rejected = False
                for t in range(T):
                    v = F[tc[t, 0], wy + ty[t, 0], wx + tx[t, 0]]
                    if v < thr[t, 0]:
                        node = 1
                    else:
                        node = 2
                    v = F[tc[t, node], wy + ty[t, node], wx + tx[t, node]]
                    if v < thr[t, node]:
                        out = leaf[t, 2 * (node - 1)]
                    else:
                        out = leaf[t, 2 * (node - 1) + 1]
                    s += out
                    ntrees_v[iy, ix] += 1
                    if out > 0:
                        votes_v[iy, ix] += 1
                    if s < stage_thr[t] and not rejected:
                        rejected = True
                        if early_exit:
                            break
                score_v[iy, ix] = s
                if not rejected:
                    passed_v[iy, ix] = 1

    return score, ntrees, votes, passed
