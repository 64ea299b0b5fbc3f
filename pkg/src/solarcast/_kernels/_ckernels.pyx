# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled split-search and nearest-neighbour kernels."""

import numpy as np
from libc.math cimport sqrt, INFINITY, NAN

cdef double TIE_RTOL = 1e-10


def best_split_sorted(x, y, Py_ssize_t min_leaf):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t i, best_i = -1
    cdef double mean = 0.0, total = 0.0, node_sse = 0.0, sl, sr, nl, nr, gain, c
    cdef double best_gain = -INFINITY, cutoff, thr
    if min_leaf < 1:
        min_leaf = 1
    if n < 2 * min_leaf:
        return NAN, -INFINITY
    with nogil:
        for i in range(n):
            mean += yv[i]
        mean = mean / n
        for i in range(n):
            c = yv[i] - mean
            total += c
            node_sse += c * c
        # pass 1 finds the best gain, pass 2 the lowest threshold tied with it
        sl = 0.0
        for i in range(n - min_leaf):
            sl += yv[i] - mean
            if i < min_leaf - 1 or not (xv[i] < xv[i + 1]):
                continue
            sr = total - sl
            nl = <double>(i + 1)
            nr = n - nl
            gain = sl * sl / nl + sr * sr / nr - total * total / n
            if gain > best_gain:
                best_gain = gain
                best_i = i
        if best_i >= 0:
            cutoff = best_gain - TIE_RTOL * node_sse
            sl = 0.0
            for i in range(n - min_leaf):
                sl += yv[i] - mean
                if i < min_leaf - 1 or not (xv[i] < xv[i + 1]):
                    continue
                sr = total - sl
                nl = <double>(i + 1)
                nr = n - nl
                gain = sl * sl / nl + sr * sr / nr - total * total / n
                if gain >= cutoff:
                    best_gain = gain
                    best_i = i
                    break
    if best_i < 0:
        return NAN, -INFINITY
    thr = 0.5 * (xv[best_i] + xv[best_i + 1])
    if thr >= xv[best_i + 1]:
        thr = xv[best_i]
    return thr, best_gain


def knn_predict(X_train, y_train, X_query, Py_ssize_t k, bint weighted):
    cdef const double[:, ::1] Xt = np.ascontiguousarray(X_train, dtype=np.float64)
    cdef const double[::1] yt = np.ascontiguousarray(y_train, dtype=np.float64)
    cdef const double[:, ::1] Xq = np.ascontiguousarray(X_query, dtype=np.float64)
    cdef Py_ssize_t n = Xt.shape[0], d = Xt.shape[1], m = Xq.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double[::1] bd = np.empty(k, dtype=np.float64)
    cdef Py_ssize_t[::1] bi = np.empty(k, dtype=np.intp)
    cdef Py_ssize_t q, i, j, cnt, pos
    cdef double d2, diff, acc, num, den, w
    cdef bint any_exact
    with nogil:
        for q in range(m):
            cnt = 0
            for i in range(n):
                d2 = 0.0
                for j in range(d):
                    diff = Xq[q, j] - Xt[i, j]
                    d2 = d2 + diff * diff
                if cnt == k and not (d2 < bd[k - 1]):
                    continue
                # stable insertion: equal distances keep the earlier row first
                pos = cnt if cnt < k else k - 1
                while pos > 0 and bd[pos - 1] > d2:
                    if pos < k:
                        bd[pos] = bd[pos - 1]
                        bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = d2
                bi[pos] = i
                if cnt < k:
                    cnt += 1
            if not weighted:
                acc = 0.0
                for j in range(k):
                    acc = acc + yt[bi[j]]
                ov[q] = acc / k
                continue
            any_exact = False
            for j in range(k):
                if bd[j] == 0.0:
                    any_exact = True
            num = 0.0
            den = 0.0
            for j in range(k):
                if any_exact:
                    w = 1.0 if bd[j] == 0.0 else 0.0
                else:
                    w = 1.0 / sqrt(bd[j])
                num = num + w * yt[bi[j]]
                den = den + w
            ov[q] = num / den
    return out
