# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for facility-location selection.

Distances are computed on the fly, so memory stays O(N) per call.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


cdef inline double _dist(const double[:, ::1] x, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t k
    cdef double s = 0.0, t
    for k in range(x.shape[1]):
        t = x[i, k] - x[j, k]
        s += t * t
    return sqrt(s)


def facility_scores(x, cur, assign, weights, selected):
    """Weighted facility value (times N) after adding each candidate.

    Selected candidates get +inf.
    """
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(cur, dtype=np.float64)
    cdef const cnp.intp_t[::1] av = np.ascontiguousarray(assign, dtype=np.intp)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const cnp.uint8_t[::1] sv = np.ascontiguousarray(selected, dtype=np.uint8)
    cdef Py_ssize_t n = xv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    base_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] base = base_arr
    cdef Py_ssize_t i, j
    cdef double d, total, wj
    with nogil:
        for i in range(n):
            if av[i] >= 0:
                base[i] = wv[av[i]] * cv[i]
            else:
                base[i] = INFINITY
        for j in range(n):
            if sv[j]:
                ov[j] = INFINITY
                continue
            wj = wv[j]
            total = 0.0
            for i in range(n):
                d = _dist(xv, i, j)
                if d < cv[i] or (d == cv[i] and j < av[i]):
                    total += wj * d
                else:
                    total += base[i]
            ov[j] = total
    return out


def nearest_selected(x, sel):
    """Nearest selected row for every row; ties go to the lowest index.

    ``sel`` must be sorted ascending.
    """
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.intp_t[::1] s = np.ascontiguousarray(sel, dtype=np.intp)
    cdef Py_ssize_t n = xv.shape[0], m = s.shape[0]
    assign = np.full(n, -1, dtype=np.intp)
    dist = np.full(n, np.inf, dtype=np.float64)
    cdef cnp.intp_t[::1] av = assign
    cdef double[::1] dv = dist
    cdef Py_ssize_t i, l
    cdef double d
    with nogil:
        for i in range(n):
            for l in range(m):
                d = _dist(xv, i, s[l])
                if d < dv[i]:
                    dv[i] = d
                    av[i] = s[l]
    return assign, dist
