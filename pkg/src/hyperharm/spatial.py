"""Metric-ball neighbor queries.

Hyperbolic balls are Euclidean balls in the Poincare model, so a KD-tree on
Poincare coordinates answers ball queries exactly after a distance filter.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .geometry import mink_inner, poincare_ball_of, to_poincare


class BallIndex:
    def __init__(self, points, a: float = 1.0):
        self.points = np.asarray(points, dtype=float)
        self.a = a
        self.tree = cKDTree(to_poincare(self.points))

    def query(self, centers, r: float, exclude_self: bool = False):
        """Indices of indexed points within distance ``r`` of each center (CSR)."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        ec, er = poincare_ball_of(centers, r, self.a)
        lists = self.tree.query_ball_point(ec, er * (1 + 1e-9) + 1e-15)
        cosh_r = np.cosh(self.a * r)
        indptr = [0]
        out = []
        for k, cand in enumerate(lists):
            if not cand:
                indptr.append(indptr[-1])
                continue
            cand = np.asarray(cand, dtype=np.int64)
            c = -mink_inner(self.points[cand], centers[k])
            keep = cand[c <= cosh_r * (1 + 1e-12)]
            if exclude_self:
                keep = keep[c[c <= cosh_r * (1 + 1e-12)] > 1 + 1e-15]
            keep.sort()
            out.append(keep)
            indptr.append(indptr[-1] + len(keep))
        indices = np.concatenate(out) if out else np.empty(0, dtype=np.int64)
        return np.asarray(indptr, dtype=np.int64), indices.astype(np.int64)

    def pairs(self, r: float):
        """Symmetric CSR graph of index pairs at distance < ``r`` (self excluded)."""
        indptr, indices = self.query(self.points, r)
        rows = np.repeat(np.arange(len(self.points)), np.diff(indptr))
        keep = rows != indices
        rows, cols = rows[keep], indices[keep]
        counts = np.bincount(rows, minlength=len(self.points))
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64), cols
