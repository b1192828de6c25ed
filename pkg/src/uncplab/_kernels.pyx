# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the kernels in uncplab.kernels.

The window counters detect the common case of ball stencils, whose offsets
form one contiguous run per row, and slide the window in O(1) per grid
position; arbitrary stencils take the direct per-offset loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, fabs, log

cnp.import_array()


cdef inline Py_ssize_t _wrap(Py_ssize_t pos, Py_ssize_t n) nogil:
    pos = pos % n
    if pos < 0:
        pos += n
    return pos


cdef long long _slide_min_1d(
    const unsigned char[::1] ind, long long lo, long long hi
) nogil:
    cdef Py_ssize_t n = ind.shape[0]
    cdef Py_ssize_t i, j, add_idx, rem_idx
    cdef long long acc = 0, best
    for j in range(lo, hi + 1):
        acc += ind[_wrap(j, n)]
    best = acc
    # incremental wrap: one compare per step instead of a division
    add_idx = _wrap(hi + 1, n)
    rem_idx = _wrap(lo, n)
    for i in range(1, n):
        acc += ind[add_idx]
        acc -= ind[rem_idx]
        if acc < best:
            best = acc
        add_idx += 1
        if add_idx == n:
            add_idx = 0
        rem_idx += 1
        if rem_idx == n:
            rem_idx = 0
    return best


def window_min_count_1d(const unsigned char[::1] ind, const long long[::1] offs):
    cdef Py_ssize_t n = ind.shape[0]
    cdef Py_ssize_t m = offs.shape[0]
    cdef Py_ssize_t i, j, pos
    cdef long long best, acc, lo, hi

    offs_arr = np.asarray(offs)
    lo = int(offs_arr.min())
    hi = int(offs_arr.max())
    if hi - lo + 1 == m and np.unique(offs_arr).size == m:
        with nogil:
            best = _slide_min_1d(ind, lo, hi)
        return best

    best = n + 1
    with nogil:
        for i in range(n):
            acc = 0
            for j in range(m):
                pos = _wrap(i + offs[j], n)
                acc += ind[pos]
            if acc < best:
                best = acc
    return best


cdef long long _slide_min_2d(
    const unsigned char[:, ::1] ind,
    const long long[:, ::1] runs,
    long long[:, ::1] counts,
    long long[:, ::1] rowsum,
) nogil:
    cdef Py_ssize_t n0 = ind.shape[0], n1 = ind.shape[1], nruns = runs.shape[0]
    cdef Py_ssize_t k, i0, i1, src
    cdef long long d0, lo, hi, acc, best
    cdef Py_ssize_t j
    for i0 in range(n0):
        for i1 in range(n1):
            counts[i0, i1] = 0
    cdef Py_ssize_t add_idx, rem_idx
    for k in range(nruns):
        d0 = runs[k, 0]
        lo = runs[k, 1]
        hi = runs[k, 2]
        for i0 in range(n0):
            acc = 0
            for j in range(lo, hi + 1):
                acc += ind[i0, _wrap(j, n1)]
            rowsum[i0, 0] = acc
            add_idx = _wrap(hi + 1, n1)
            rem_idx = _wrap(lo, n1)
            for i1 in range(1, n1):
                acc += ind[i0, add_idx]
                acc -= ind[i0, rem_idx]
                rowsum[i0, i1] = acc
                add_idx += 1
                if add_idx == n1:
                    add_idx = 0
                rem_idx += 1
                if rem_idx == n1:
                    rem_idx = 0
        for i0 in range(n0):
            src = _wrap(i0 + d0, n0)
            for i1 in range(n1):
                counts[i0, i1] += rowsum[src, i1]
    best = counts[0, 0]
    for i0 in range(n0):
        for i1 in range(n1):
            if counts[i0, i1] < best:
                best = counts[i0, i1]
    return best


def window_min_count_2d(const unsigned char[:, ::1] ind, const long long[:, ::1] offs):
    cdef Py_ssize_t n0 = ind.shape[0], n1 = ind.shape[1]
    cdef Py_ssize_t m = offs.shape[0]
    cdef Py_ssize_t i0, i1, j, p0, p1
    cdef long long best, acc

    # one contiguous run of second coordinates per distinct first coordinate?
    offs_arr = np.asarray(offs)
    rows = []
    contiguous = True
    for d0 in np.unique(offs_arr[:, 0]):
        d1 = offs_arr[offs_arr[:, 0] == d0, 1]
        d1_lo = int(d1.min())
        d1_hi = int(d1.max())
        if d1_hi - d1_lo + 1 != d1.size or np.unique(d1).size != d1.size:
            contiguous = False
            break
        rows.append((int(d0), d1_lo, d1_hi))
    if contiguous:
        runs_arr = np.asarray(rows, dtype=np.int64)
        counts_arr = np.empty((n0, n1), dtype=np.int64)
        rowsum_arr = np.empty((n0, n1), dtype=np.int64)
        cdef_runs = runs_arr
        best = _slide_min_2d(ind, cdef_runs, counts_arr, rowsum_arr)
        return best

    best = n0 * n1 + 1
    with nogil:
        for i0 in range(n0):
            for i1 in range(n1):
                acc = 0
                for j in range(m):
                    p0 = _wrap(i0 + offs[j, 0], n0)
                    p1 = _wrap(i1 + offs[j, 1], n1)
                    acc += ind[p0, p1]
                if acc < best:
                    best = acc
    return best


cdef inline double _antider(double u, double eta) nogil:
    # int log sqrt(u^2 + eta^2) du, exact
    cdef double r2 = u * u + eta * eta
    cdef double out = 0.0
    if r2 > 0.0:
        out = 0.5 * u * log(r2)
    out -= u
    if eta > 0.0:
        out += eta * atan2(u, eta)
    return out


def segment_log_sum(
    const double[::1] tx,
    const double[::1] ty,
    const double[::1] lo,
    const double[::1] hi,
    const double[::1] w,
):
    cdef Py_ssize_t n = tx.shape[0], m = lo.shape[0]
    cdef Py_ssize_t i, j
    cdef double eta, x, acc, a_lo, a_hi, prev_edge, prev_val
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            x = tx[i]
            eta = fabs(ty[i])
            acc = 0.0
            prev_edge = 0.0
            prev_val = 0.0
            for j in range(m):
                # adjacent cells share an edge; reuse its antiderivative
                if j > 0 and lo[j] == prev_edge:
                    a_lo = prev_val
                else:
                    a_lo = _antider(lo[j] - x, eta)
                a_hi = _antider(hi[j] - x, eta)
                acc += w[j] * (a_hi - a_lo)
                prev_edge = hi[j]
                prev_val = a_hi
            out[i] = acc
    return out_arr


def green_pair_min(
    const double[::1] xr,
    const double[::1] xi,
    const double[::1] yr,
    const double[::1] yi,
    double radius,
):
    cdef Py_ssize_t n = xr.shape[0], m = yr.shape[0]
    cdef Py_ssize_t i, j
    cdef double r2 = radius * radius
    cdef double a, b, num2, den2, val, best
    best = 1e300
    with nogil:
        for i in range(n):
            for j in range(m):
                # |R^2 - x conj(y)|^2 and R^2 |x - y|^2
                a = r2 - (xr[i] * yr[j] + xi[i] * yi[j])
                b = xr[i] * yi[j] - xi[i] * yr[j]
                num2 = a * a + b * b
                a = xr[i] - yr[j]
                b = xi[i] - yi[j]
                den2 = r2 * (a * a + b * b)
                val = num2 / den2
                if val < best:
                    best = val
    return 0.5 * log(best) / (2.0 * np.pi)
