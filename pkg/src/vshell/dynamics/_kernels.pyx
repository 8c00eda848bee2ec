# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled particle kernels. Mirrors ``_kernels_py`` operation by operation."""

from cython.parallel cimport prange
cimport cython
import numpy as np

cdef int _threads = 1


def set_threads(int n):
    global _threads
    _threads = n if n > 0 else 1


def get_threads():
    return _threads


def sort_order(const double[::1] r, long[::1] order):
    """Sort ``order`` by ``r`` stably relative to its previous content.

    Nearly sorted input uses insertion sort (close to O(N)); once that
    exceeds a small shift budget the rest goes to NumPy's stable sort,
    which handles the partly sorted runs well. Ties keep their
    previous relative order either way, which matches the NumPy fallback.
    """
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t i, j
    cdef long key
    cdef double rk
    cdef Py_ssize_t shifts = 0
    cdef Py_ssize_t budget = n // 4 + 1024
    cdef bint done = True
    with nogil:
        for i in range(1, n):
            key = order[i]
            rk = r[key]
            j = i - 1
            while j >= 0 and r[order[j]] > rk:
                order[j + 1] = order[j]
                j -= 1
                shifts += 1
            order[j + 1] = key
            if shifts > budget:
                done = False
                break
    if not done:
        o = np.asarray(order)
        o[:] = o[np.argsort(np.asarray(r)[o], kind="stable")]
    return np.asarray(order)


def enclosed_mass(const double[::1] r, const double[::1] weight, const long[::1] order):
    """Mass inside each particle; particles at equal radius share half the group."""
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t i, start, end, j
    cdef double before, total, value
    out_arr = np.empty(n, dtype=np.float64)
    cs_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] cs = cs_arr
    if n == 0:
        return out_arr
    with nogil:
        total = 0.0
        for i in range(n):
            total = total + weight[order[i]]
            cs[i] = total
        start = 0
        while start < n:
            end = start
            while end + 1 < n and r[order[end + 1]] == r[order[start]]:
                end += 1
            before = cs[start - 1] if start > 0 else 0.0
            value = before + 0.5 * (cs[end] - before)
            for j in range(start, end + 1):
                out[order[j]] = value
            start = end + 1
    return out_arr


def kick(double[::1] w, const double[::1] r, const double[::1] L, const double[::1] m,
         double Mc, double h):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t i
    cdef double ri, acc
    for i in prange(n, nogil=True, num_threads=_threads, schedule="static"):
        ri = r[i]
        acc = L[i] / (ri * ri * ri) - (m[i] + Mc) / (ri * ri)
        w[i] = w[i] + h * acc


def drift(double[::1] r, const double[::1] w, double h):
    """r += h w; returns the smallest new radius."""
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t i
    for i in prange(n, nogil=True, num_threads=_threads, schedule="static"):
        r[i] = r[i] + h * w[i]
    cdef double lo = np.inf
    with nogil:
        for i in range(n):
            if r[i] < lo:
                lo = r[i]
    return lo
