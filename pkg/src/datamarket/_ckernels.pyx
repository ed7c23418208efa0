# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, pow, fabs, NAN

cnp.import_array()


def cosine_topk(matrix, query, Py_ssize_t k):
    cdef const double[:, ::1] m = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(query, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], d = m.shape[1]
    cdef Py_ssize_t i, j, pos, kk
    cdef double s, s0, s1, s2, s3
    if n == 0 or k <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    kk = k if k < n else n
    out_idx = np.empty(kk, dtype=np.int64)
    out_sim = np.empty(kk, dtype=np.float64)
    cdef cnp.int64_t[::1] bi = out_idx
    cdef double[::1] bs = out_sim
    cdef Py_ssize_t filled = 0
    for i in range(n):
        # same summation order for every row, so equal rows score equal
        s0 = s1 = s2 = s3 = 0.0
        j = 0
        while j + 4 <= d:
            s0 += m[i, j] * q[j]
            s1 += m[i, j + 1] * q[j + 1]
            s2 += m[i, j + 2] * q[j + 2]
            s3 += m[i, j + 3] * q[j + 3]
            j += 4
        while j < d:
            s0 += m[i, j] * q[j]
            j += 1
        s = (s0 + s1) + (s2 + s3)
        # rows arrive in index order, so a strict comparison keeps ties stable
        if filled == kk and s <= bs[kk - 1]:
            continue
        pos = filled if filled < kk else kk - 1
        while pos > 0 and bs[pos - 1] < s:
            if pos < kk:
                bs[pos] = bs[pos - 1]
                bi[pos] = bi[pos - 1]
            pos -= 1
        bs[pos] = s
        bi[pos] = i
        if filled < kk:
            filled += 1
    return out_idx, out_sim


def approx_xmin_scan(x_sorted, Py_ssize_t min_tail):
    cdef const double[::1] x = np.ascontiguousarray(x_sorted, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j, t, nu = 0
    if n == 0:
        empty = np.empty(0, dtype=np.float64)
        return empty, empty.copy(), empty.copy(), np.empty(0, dtype=np.int64)

    # distinct values, their first index and the count of samples <= value
    uniq_a = np.empty(n, dtype=np.float64)
    first_a = np.empty(n, dtype=np.int64)
    upto_a = np.empty(n, dtype=np.int64)
    tail_a = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] uniq = uniq_a
    cdef cnp.int64_t[::1] first = first_a
    cdef cnp.int64_t[::1] upto = upto_a
    cdef double[::1] tail_log = tail_a
    for i in range(n):
        if i == 0 or x[i] != x[i - 1]:
            uniq[nu] = x[i]
            first[nu] = i
            if nu > 0:
                upto[nu - 1] = i
            nu += 1
    upto[nu - 1] = n
    tail_log[n] = 0.0
    for i in range(n - 1, -1, -1):
        tail_log[i] = tail_log[i + 1] + log(x[i])

    xm_a = np.empty(nu, dtype=np.float64)
    al_a = np.empty(nu, dtype=np.float64)
    ks_a = np.empty(nu, dtype=np.float64)
    nt_a = np.empty(nu, dtype=np.int64)
    cdef double[::1] xm_o = xm_a
    cdef double[::1] al_o = al_a
    cdef double[::1] ks_o = ks_a
    cdef cnp.int64_t[::1] nt_o = nt_a
    cdef Py_ssize_t count = 0, start, m
    cdef double xm, base, alpha, expo, c, cprev, f_at, f_before, dist, dev
    for j in range(nu - 1):
        start = first[j]
        m = n - start
        if m < min_tail:
            break
        xm = uniq[j]
        base = xm - 0.5
        alpha = 1.0 + m / (tail_log[start] - m * log(base))
        expo = 1.0 - alpha
        dist = 0.0
        cprev = 0.0
        for t in range(j, nu):
            c = (upto[t] - start) / <double>m
            f_at = 1.0 - pow((uniq[t] + 0.5) / base, expo)
            f_before = 1.0 - pow((uniq[t] - 0.5) / base, expo)
            dev = fabs(c - f_at)
            if dev > dist:
                dist = dev
            dev = fabs(cprev - f_before)
            if dev > dist:
                dist = dev
            cprev = c
        xm_o[count] = xm
        al_o[count] = alpha
        ks_o[count] = dist
        nt_o[count] = m
        count += 1
    return xm_a[:count].copy(), al_a[:count].copy(), ks_a[:count].copy(), nt_a[:count].copy()


def acf_lag1(series):
    cdef const double[::1] x = np.ascontiguousarray(series, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], t
    cdef double mean = 0.0, num = 0.0, den = 0.0, a, b
    if n == 0:
        return NAN
    for t in range(n):
        mean += x[t]
    mean /= n
    for t in range(n):
        a = x[t] - mean
        den += a * a
        if t + 1 < n:
            b = x[t + 1] - mean
            num += a * b
    if den == 0.0:
        return NAN
    return num / den
