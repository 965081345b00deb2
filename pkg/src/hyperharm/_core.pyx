# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Every function has a numpy twin in ``_pycore``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, sinh, acosh

cnp.import_array()


def min_line_product(const double[:, ::1] alpha, const long[::1] I, const long[::1] J,
                     const double[::1] C):
    """min over lines l of alpha[k, I[l]] * alpha[k, J[l]] * C[l], with first argmin."""
    cdef Py_ssize_t N = alpha.shape[0], L = I.shape[0], k, l
    cdef double best, v
    cdef long arg
    out = np.empty(N, dtype=np.float64)
    idx = np.empty(N, dtype=np.int64)
    cdef double[::1] o = out
    cdef long[::1] ix = idx
    for k in range(N):
        best = alpha[k, I[0]] * alpha[k, J[0]] * C[0]
        arg = 0
        for l in range(1, L):
            v = alpha[k, I[l]] * alpha[k, J[l]] * C[l]
            if v < best:
                best = v
                arg = l
        o[k] = best
        ix[k] = arg
    return out, idx


def greedy_cover(const double[::1] alpha, const double[:, ::1] xi, double thresh):
    """Greedy cover in visual-metric order; returns indices of centers.

    Point i is covered by center c when 2 a_i a_c >= thresh * (1 - xi_i . xi_c).
    """
    cdef Py_ssize_t N = alpha.shape[0], D = xi.shape[1], i, c, d, K = 0
    cdef double dot, lhs
    cdef bint covered
    centers = np.empty(N, dtype=np.int64)
    cdef long[::1] cen = centers
    for i in range(N):
        covered = False
        for c in range(K):
            dot = 0.0
            for d in range(D):
                dot += xi[i, d] * xi[cen[c], d]
            lhs = 2.0 * alpha[i] * alpha[cen[c]]
            if lhs >= thresh * (1.0 - dot):
                covered = True
                break
        if not covered:
            cen[K] = i
            K += 1
    return centers[:K]


def greedy_select(const long[::1] indptr, const long[::1] indices, const long[::1] order):
    """Greedy maximal independent set along ``order`` in a CSR neighbor graph."""
    cdef Py_ssize_t N = order.shape[0], t, j
    cdef long v
    blocked = np.zeros(indptr.shape[0] - 1, dtype=np.uint8)
    chosen = np.zeros(indptr.shape[0] - 1, dtype=np.uint8)
    cdef unsigned char[::1] b = blocked
    cdef unsigned char[::1] ch = chosen
    for t in range(N):
        v = order[t]
        if b[v]:
            continue
        ch[v] = 1
        b[v] = 1
        for j in range(indptr[v], indptr[v + 1]):
            b[indices[j]] = 1
    return chosen.astype(bool)


def greedy_color(const long[::1] indptr, const long[::1] indices):
    """Smallest-available-color greedy coloring in index order."""
    cdef Py_ssize_t N = indptr.shape[0] - 1, v, j, c
    colors = np.full(N, -1, dtype=np.int64)
    cdef long[::1] col = colors
    used = np.zeros(N + 1, dtype=np.int64)
    cdef long[::1] u = used
    for v in range(N):
        for j in range(indptr[v], indptr[v + 1]):
            if col[indices[j]] >= 0:
                u[col[indices[j]]] = v + 1
        c = 0
        while u[c] == v + 1:
            c += 1
        col[v] = c
    return colors


def edge_log_sum(const double[:, ::1] F, const long[::1] indptr, const long[::1] indices,
                 const double[::1] w):
    """For each vertex v: sum_u w_vu log_{F[v]} F[u] in the unit hyperboloid."""
    cdef Py_ssize_t N = F.shape[0], D = F.shape[1], v, j, d
    cdef long u
    cdef double ip, c, dist, coef, s
    out = np.zeros((N, D), dtype=np.float64)
    cdef double[:, ::1] o = out
    for v in range(N):
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            ip = -F[v, 0] * F[u, 0]
            for d in range(1, D):
                ip += F[v, d] * F[u, d]
            c = -ip
            if c < 1.0:
                c = 1.0
            dist = acosh(c)
            if dist < 1e-8:
                coef = 1.0
            else:
                coef = dist / sinh(dist)
            s = w[j] * coef
            for d in range(D):
                o[v, d] += s * (F[u, d] - c * F[v, d])
    return out


def cylinder_count(const double[:, ::1] alpha, const long[::1] I, const long[::1] J,
                   const double[::1] C, const double[::1] lo, const double[::1] hi,
                   const double[::1] thresh):
    """Number of lines l with alpha_I alpha_J C <= thresh[l] and lo[l] <= alpha_J / alpha_I <= hi[l]."""
    cdef Py_ssize_t N = alpha.shape[0], L = I.shape[0], k, l
    cdef double ai, aj
    cdef long cnt
    out = np.zeros(N, dtype=np.int64)
    cdef long[::1] o = out
    for k in range(N):
        cnt = 0
        for l in range(L):
            ai = alpha[k, I[l]]
            aj = alpha[k, J[l]]
            if ai * aj * C[l] <= thresh[l] and aj >= lo[l] * ai and aj <= hi[l] * ai:
                cnt += 1
        o[k] = cnt
    return out
