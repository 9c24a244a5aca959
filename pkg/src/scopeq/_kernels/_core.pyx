# cython: language_level=3
"""Compiled kernels. Same contract as pyfallback; see that module."""

from libc.math cimport exp, log, sqrt, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()


def soft_assign_batch(double[:, ::1] emb, double[:, ::1] centers,
                      double alpha, double eps):
    cdef Py_ssize_t n = emb.shape[0]
    cdef Py_ssize_t d = emb.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    out_arr = np.empty((n, k))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] logits = np.empty(k)
    cdef Py_ssize_t i, j, c
    cdef double d2, diff, mx, total
    for i in range(n):
        mx = -INFINITY
        for c in range(k):
            d2 = 0.0
            for j in range(d):
                diff = emb[i, j] - centers[c, j]
                d2 += diff * diff
            logits[c] = -alpha * log(d2 + eps)
            if logits[c] > mx:
                mx = logits[c]
        total = 0.0
        for c in range(k):
            out[i, c] = exp(logits[c] - mx)
            total += out[i, c]
        for c in range(k):
            out[i, c] /= total
    return out_arr


def lloyd_iteration(double[:, ::1] points, double[:, ::1] centers):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    labels_arr = np.empty(n, dtype=np.int64)
    sums_arr = np.zeros((k, d))
    counts_arr = np.zeros(k, dtype=np.int64)
    cdef long long[::1] labels = labels_arr
    cdef double[:, ::1] sums = sums_arr
    cdef long long[::1] counts = counts_arr
    cdef Py_ssize_t i, j, c, best
    cdef double d2, diff, best_d2, inertia = 0.0
    for i in range(n):
        best = 0
        best_d2 = INFINITY
        for c in range(k):
            d2 = 0.0
            for j in range(d):
                diff = points[i, j] - centers[c, j]
                d2 += diff * diff
            if d2 < best_d2:
                best_d2 = d2
                best = c
        labels[i] = best
        counts[best] += 1
        inertia += best_d2
        for j in range(d):
            sums[best, j] += points[i, j]
    return labels_arr, sums_arr, counts_arr, inertia


def nt_xent_loss_grad(double[:, ::1] z1, double[:, ::1] z2, double tau):
    cdef Py_ssize_t n = z1.shape[0]
    cdef Py_ssize_t d = z1.shape[1]
    cdef Py_ssize_t m = 2 * n

    u_arr = np.empty((m, d))
    cdef double[:, ::1] u = u_arr
    cdef double[::1] norms = np.empty(m)
    cdef Py_ssize_t p, q, i, kk, j
    cdef double acc
    for p in range(m):
        acc = 0.0
        for j in range(d):
            if p < n:
                u[p, j] = z1[p, j]
            else:
                u[p, j] = z2[p - n, j]
            acc += u[p, j] * u[p, j]
        norms[p] = sqrt(acc)
        for j in range(d):
            u[p, j] /= norms[p]

    # logits[p, q] = cos(u_p, u_q) / tau. BLAS beats any scalar loop here;
    # the masked reductions below are where the compiled path earns its keep.
    logits_arr = np.dot(u_arr, u_arr.T)
    logits_arr /= tau
    cdef double[:, ::1] logits = logits_arr

    # Per-pair log-sum-exp denominator over the four view blocks, k != i.
    cdef double[::1] log_d = np.empty(n)
    cdef double mx, total, loss = 0.0
    for i in range(n):
        mx = -INFINITY
        for kk in range(n):
            if kk == i:
                continue
            if logits[i, kk] > mx:
                mx = logits[i, kk]
            if logits[i, n + kk] > mx:
                mx = logits[i, n + kk]
            if logits[n + i, kk] > mx:
                mx = logits[n + i, kk]
            if logits[n + i, n + kk] > mx:
                mx = logits[n + i, n + kk]
        total = 0.0
        for kk in range(n):
            if kk == i:
                continue
            total += exp(logits[i, kk] - mx)
            total += exp(logits[i, n + kk] - mx)
            total += exp(logits[n + i, kk] - mx)
            total += exp(logits[n + i, n + kk] - mx)
        log_d[i] = mx + log(total)
        loss += log_d[i] - logits[i, n + i]
    loss /= n

    # dL/dS entries, then dU = (G + G^T) U and the per-row radial projection.
    cdef double coef = 1.0 / (n * tau)
    g_arr = np.zeros((m, m))
    cdef double[:, ::1] g = g_arr
    for i in range(n):
        for kk in range(n):
            if kk == i:
                continue
            g[i, kk] = coef * exp(logits[i, kk] - log_d[i])
            g[i, n + kk] = coef * exp(logits[i, n + kk] - log_d[i])
            g[n + i, kk] = coef * exp(logits[n + i, kk] - log_d[i])
            g[n + i, n + kk] = coef * exp(logits[n + i, n + kk] - log_d[i])
        g[i, n + i] -= coef

    g1_arr = np.empty((n, d))
    g2_arr = np.empty((n, d))
    cdef double[:, ::1] g1 = g1_arr
    cdef double[:, ::1] g2 = g2_arr
    du_arr = np.dot(g_arr + g_arr.T, u_arr)
    cdef double[:, ::1] du = du_arr
    cdef double radial
    for p in range(m):
        radial = 0.0
        for j in range(d):
            radial += du[p, j] * u[p, j]
        for j in range(d):
            acc = (du[p, j] - radial * u[p, j]) / norms[p]
            if p < n:
                g1[p, j] = acc
            else:
                g2[p - n, j] = acc
    return loss, g1_arr, g2_arr
