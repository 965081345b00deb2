"""Pure numpy implementations of the compiled kernels in ``_core.pyx``."""

import numpy as np


def min_line_product(alpha, I, J, C):
    N = alpha.shape[0]
    best = np.full(N, np.inf)
    arg = np.zeros(N, dtype=np.int64)
    step = max(1, 4_000_000 // max(N, 1))
    for s in range(0, len(I), step):
        v = alpha[:, I[s:s + step]] * alpha[:, J[s:s + step]] * C[s:s + step]
        k = np.argmin(v, axis=1)
        m = v[np.arange(N), k]
        better = m < best
        best[better] = m[better]
        arg[better] = k[better] + s
    return best, arg


def greedy_cover(alpha, xi, thresh):
    centers = []
    ca = np.empty(0)
    cx = np.empty((0, xi.shape[1]))
    for i in range(alpha.shape[0]):
        if len(centers):
            if np.any(2.0 * alpha[i] * ca >= thresh * (1.0 - cx @ xi[i])):
                continue
        centers.append(i)
        ca = np.append(ca, alpha[i])
        cx = np.vstack([cx, xi[i]])
    return np.asarray(centers, dtype=np.int64)


def greedy_select(indptr, indices, order):
    n = len(indptr) - 1
    blocked = np.zeros(n, dtype=bool)
    chosen = np.zeros(n, dtype=bool)
    for v in order:
        if blocked[v]:
            continue
        chosen[v] = True
        blocked[v] = True
        blocked[indices[indptr[v]:indptr[v + 1]]] = True
    return chosen


def greedy_color(indptr, indices):
    n = len(indptr) - 1
    colors = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        nb = colors[indices[indptr[v]:indptr[v + 1]]]
        taken = set(nb[nb >= 0].tolist())
        c = 0
        while c in taken:
            c += 1
        colors[v] = c
    return colors


def edge_log_sum(F, indptr, indices, w):
    n, D = F.shape
    rows = np.repeat(np.arange(n), np.diff(indptr))
    Fv = F[rows]
    Fu = F[indices]
    c = np.maximum(Fv[:, 0] * Fu[:, 0] - np.sum(Fv[:, 1:] * Fu[:, 1:], axis=1), 1.0)
    dist = np.arccosh(c)
    small = dist < 1e-8
    coef = np.where(small, 1.0, dist / np.sinh(np.where(small, 1.0, dist)))
    contrib = (w * coef)[:, None] * (Fu - c[:, None] * Fv)
    out = np.zeros((n, D))
    for d in range(D):
        out[:, d] = np.bincount(rows, weights=contrib[:, d], minlength=n)
    return out


def cylinder_count(alpha, I, J, C, lo, hi, thresh):
    N = alpha.shape[0]
    out = np.zeros(N, dtype=np.int64)
    step = max(1, 4_000_000 // max(N, 1))
    for s in range(0, len(I), step):
        ai = alpha[:, I[s:s + step]]
        aj = alpha[:, J[s:s + step]]
        inside = (ai * aj * C[s:s + step] <= thresh[s:s + step]) & (aj >= lo[s:s + step] * ai) \
            & (aj <= hi[s:s + step] * ai)
        out += inside.sum(axis=1)
    return out
