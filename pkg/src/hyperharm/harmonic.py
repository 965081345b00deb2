"""Discrete harmonic maps from geodesic balls into hyperbolic space.

A :class:`BallMesh` carries symmetric nonnegative edge weights ``w`` and
vertex masses ``m``; its Laplacian is ``(Lf)(v) = sum_u w_uv (f(u) - f(v)) / m_v``.
In H^2 the weights are the cotangent weights of a Delaunay triangulation of
concentric rings, measured in normal coordinates of each triangle.  In H^3
they are Gaussian graph weights between nearby points of spherical
Fibonacci shells.  In both cases masses are calibrated so that the
Laplacian of ``dist(v, .)^2`` at v is exactly ``2n``.

The tension of a map ``F`` is ``sum_u w_uv log_{F(v)} F(u) / m_v``.
Dirichlet problems are solved either by damped nonlinear Jacobi (each
vertex moves towards the weighted centroid of its neighbours' images) or
by a preconditioned iteration that solves the scalar Laplacian for a
tangent update and applies it through the exponential map.  Both accept a
step only if the energy ``1/2 sum w dist^2`` does not increase.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg, splu
from scipy.spatial import Delaunay, cKDTree

from . import _backend
from .geometry import (GeometryError, boost_to, exp_map, log_map, mink_inner, mink_norm,
                       origin, project_to_tangent, tangent_frame, to_poincare, unit_distance)
from .mollifier import DiscreteMap
from .spatial import BallIndex

GOLDEN = (1 + 5 ** 0.5) / 2


# ---------------------------------------------------------------------------
# meshes


@dataclass
class BallMesh:
    center: np.ndarray
    radius: float
    h: float
    points: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    a: float = 1.0
    kind: str = "cotan"
    ghost: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.ghost is None:
            self.ghost = np.zeros(len(self.points), dtype=bool)

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self):
        return len(self.points)

    @property
    def interior(self) -> np.ndarray:
        return np.nonzero(~self.boundary)[0]

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.points)), np.diff(self.indptr))

    def stiffness(self) -> sparse.csr_matrix:
        """``K`` with ``(K f)(v) = sum_u w_uv (f(v) - f(u))``."""
        N = len(self.points)
        W = sparse.csr_matrix((self.weights, self.indices, self.indptr), shape=(N, N))
        return (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()

    def laplacian(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return -(self.stiffness() @ f) / (self.mass if f.ndim == 1 else self.mass[:, None])

    def distance_from_center(self) -> np.ndarray:
        return unit_distance(self.points, self.center[None]) / self.a

    def audit(self) -> dict:
        """Connectivity, boundary placement and interior degrees."""
        N = len(self.points)
        W = sparse.csr_matrix((np.ones(len(self.indices)), self.indices, self.indptr), shape=(N, N))
        ncomp = sparse.csgraph.connected_components(W, directed=False)[0]
        deg = np.diff(self.indptr)
        r = self.distance_from_center()[self.boundary & ~self.ghost]
        return {"connected": bool(ncomp == 1),
                "boundary_in_shell": bool(np.all((r >= self.radius - self.h - 1e-9)
                                                 & (r <= self.radius + 1e-9))),
                "min_interior_degree": int(deg[~self.boundary].min()) if np.any(~self.boundary) else 0,
                "vertices": N}


def _sphere_points(count: int, n: int, phase: float) -> np.ndarray:
    if n == 2:
        th = 2 * np.pi * (np.arange(count) + phase) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    ph = 2 * np.pi * (i / GOLDEN + phase)
    s = np.sqrt(1 - z**2)
    return np.stack([s * np.cos(ph), s * np.sin(ph), z], axis=1)


def _ring_layout(d: float, h: float, n: int, a: float, ghosts: int = 0):
    """Radii and unit directions of the concentric rings or shells, centred at the origin.

    ``ghosts`` extra shells continue the spacing beyond d.
    """
    k = max(1, int(round(d / h)))
    radii = d * np.arange(k + 1 + ghosts) / k
    pts, rad = [origin(n)], [0.0]
    for j, r in enumerate(radii[1:], start=1):
        if n == 2:
            count = max(6, int(round(2 * np.pi * math.sinh(a * r) / (a * h))))
        else:
            count = max(12, int(round(4 * np.pi * (math.sinh(a * r) / (a * h)) ** 2)))
        dirs = _sphere_points(count, n, (j / GOLDEN) % 1.0)
        X = np.concatenate([np.full((count, 1), math.cosh(a * r)), math.sinh(a * r) * dirs], axis=1)
        pts.append(X)
        rad.append(np.full(count, r))
    P = np.vstack([pts[0][None]] + pts[1:])
    return P, np.concatenate([[0.0]] + rad[1:]), radii[k]


def _csr_from_pairs(N, i, j, w):
    M = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(N, N)).tocsr()
    M.sum_duplicates()
    M.eliminate_zeros()
    M.sort_indices()
    return M.indptr.astype(np.int64), M.indices.astype(np.int64), M.data


def _local_coords(P, simplices, a):
    """Normal coordinates of each simplex's vertices at its first vertex (metric units)."""
    x0 = P[simplices[:, 0]]
    E = tangent_frame(x0)
    sig = np.r_[-1.0, np.ones(P.shape[1] - 1)]
    out = []
    for k in range(simplices.shape[1]):
        L = log_map(x0, P[simplices[:, k]])
        out.append(np.einsum("sd,snd->sn", L * sig, E) / a)
    return np.stack(out, axis=1)


def _calibrated_mass(P, indptr, indices, w, a):
    """Masses making the Laplacian of ``dist(v, .)^2`` equal ``2n`` at every vertex.

    For cotangent weights this is the circumcentric (Voronoi) area.
    """
    n = P.shape[1] - 1
    rows = np.repeat(np.arange(len(P)), np.diff(indptr))
    d2 = (unit_distance(P[rows], P[indices]) / a) ** 2
    return np.bincount(rows, weights=w * d2, minlength=len(P)) / (2 * n)


def _cotan_weights(P, simplices, a):
    """P1 stiffness weights of each simplex, in normal coordinates at its first vertex."""
    n = P.shape[1] - 1
    Y = _local_coords(P, simplices, a)
    M = np.transpose(Y[:, 1:] - Y[:, :1], (0, 2, 1))
    vol = np.abs(np.linalg.det(M)) / math.factorial(n)
    Ginv = np.linalg.inv(M)
    G = np.concatenate([-Ginv.sum(axis=1, keepdims=True), Ginv], axis=1)
    I, J, V = [], [], []
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            I.append(simplices[:, i])
            J.append(simplices[:, j])
            V.append(-vol * np.sum(G[:, i] * G[:, j], axis=1))
    I, J, V = map(np.concatenate, (I, J, V))
    N = len(P)
    W = sparse.coo_matrix((V, (np.minimum(I, J), np.maximum(I, J))), shape=(N, N)).tocsr().tocoo()
    # slightly obtuse pairs can come out negative; clipping keeps the maximum principle
    return _csr_from_pairs(N, W.row, W.col, np.maximum(W.data, 0.0))


def _graph_weights(P, h, a, bandwidth=2.5):
    """Gaussian weights ``exp(-(d/h)^2)`` on all pairs closer than ``bandwidth * h``."""
    indptr, indices = BallIndex(P, a).pairs(bandwidth * h)
    rows = np.repeat(np.arange(len(P)), np.diff(indptr))
    w = np.exp(-(unit_distance(P[rows], P[indices]) / (a * h)) ** 2)
    return indptr, indices, w


def mesh_ball(center, d: float, h: float, a: float = 1.0) -> BallMesh:
    """Mesh of ``B(center, d)`` with ring (shell) spacing h."""
    center = np.asarray(center, dtype=float)
    n = len(center) - 1
    if not 0 < h <= d / 4:
        raise GeometryError("mesh spacing h must lie in (0, d/4]")
    # The Gaussian stencil reaches 2.5h; one exterior shell of Dirichlet
    # vertices completes it for every interior vertex.
    P0, rad, rmax = _ring_layout(d, h, n, a, ghosts=0 if n == 2 else 1)
    P = P0 @ boost_to(center).T
    if n == 2:
        tri = Delaunay(to_poincare(P0)).simplices.astype(np.int64)
        indptr, indices, w = _cotan_weights(P, tri, a)
        kind = "cotan"
    else:
        indptr, indices, w = _graph_weights(P, h, a)
        kind = "graph"
    mass = _calibrated_mass(P, indptr, indices, w, a)
    boundary = rad >= rmax - 1e-12
    ghost = rad > rmax + 1e-12
    return BallMesh(center, float(d), float(h), P, boundary, indptr, indices, w, mass, a, kind, ghost)


# ---------------------------------------------------------------------------
# tension and energy


def tension(mesh: BallMesh, F) -> np.ndarray:
    """Tangent vectors ``sum_u w_uv log_{F(v)} F(u) / m_v`` (unit-model coordinates); 0 on the boundary."""
    T = _backend.edge_log_sum(F, mesh.indptr, mesh.indices, mesh.weights) / mesh.mass[:, None]
    T = project_to_tangent(F, T)
    T[mesh.boundary] = 0.0
    return T


def tension_norm(mesh: BallMesh, F) -> np.ndarray:
    """Metric length of the tension at each vertex."""
    return mink_norm(tension(mesh, F)) / mesh.a


def energy(mesh: BallMesh, F) -> float:
    rows = mesh.rows
    keep = rows < mesh.indices
    d = unit_distance(F[rows[keep]], F[mesh.indices[keep]]) / mesh.a
    return float(0.5 * np.sum(mesh.weights[keep] * d**2))


@dataclass
class SolveReport:
    iterations: int
    residual: float
    sup_dist: float
    converged: bool
    energy_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    d: float = float("nan")
    method: str = "preconditioned"

    def to_dict(self):
        return {"d": self.d, "iterations": self.iterations, "residual": self.residual,
                "sup_dist": self.sup_dist, "converged": self.converged, "method": self.method,
                "energy_trace": self.energy_trace, "residual_trace": self.residual_trace,
                "step_trace": self.step_trace}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iteration,energy,residual,step\n")
        for k, (e, r, s) in enumerate(zip(self.energy_trace, self.residual_trace, self.step_trace)):
            buf.write(f"{k},{e:.12g},{r:.12g},{s:.6g}\n")
        return buf.getvalue()


class _Preconditioner:
    """Inverse of the interior stiffness matrix applied to ``mass * T``.

    Planar meshes are factorized once; the wider stencils of the
    three-dimensional graph make a factorization fill in badly, so there
    the system is solved by diagonally preconditioned conjugate gradients.
    """

    def __init__(self, mesh: BallMesh, rtol: float = 1e-10):
        I = mesh.interior
        K = mesh.stiffness()[I][:, I].tocsr()
        self.I = I
        self.m = mesh.mass[I]
        self.rtol = rtol
        self.direct = mesh.n == 2
        if len(I) == 0:
            self.lu = None
        elif self.direct:
            self.lu = splu(K.tocsc())
        else:
            self.K = K
            self.dinv = 1.0 / K.diagonal()
            self.lu = True

    def __call__(self, F, T):
        X = np.zeros_like(T)
        if self.lu is None:
            return X
        # coefficients in the smooth frame field make neighbouring tangent spaces comparable
        E = tangent_frame(F[self.I])
        sig = np.r_[-1.0, np.ones(F.shape[1] - 1)]
        rhs = self.m[:, None] * np.einsum("vd,vkd->vk", T[self.I] * sig, E)
        if self.direct:
            coef = self.lu.solve(np.ascontiguousarray(rhs))
        else:
            M = LinearOperator(self.K.shape, matvec=lambda v: self.dinv * v)
            coef = np.empty_like(rhs)
            for c in range(rhs.shape[1]):
                coef[:, c], _ = cg(self.K, rhs[:, c], rtol=self.rtol, M=M, maxiter=2000)
        X[self.I] = np.einsum("vk,vkd->vd", coef, E)
        return X


class _Jacobi:
    """Step towards the weighted centroid of the neighbours' images."""

    def __init__(self, mesh: BallMesh):
        wsum = np.bincount(mesh.rows, weights=mesh.weights, minlength=len(mesh))
        self.scale = (mesh.mass / np.maximum(wsum, 1e-300))[:, None]

    def __call__(self, F, T):
        return T * self.scale


def dirichlet_solve(mesh: BallMesh, boundary_values, tol: float = 1e-6, max_iters: int = 200,
                    initial=None, method: str = "preconditioned", eta: float = 0.9,
                    reference=None):
    """Harmonic map of the mesh with the given boundary values.

    ``boundary_values`` holds target points for every vertex (only boundary
    rows are used) or for the boundary vertices alone.  ``initial`` seeds
    the interior (defaults to the boundary-value array, which is the natural
    warm start when it is a map on the whole mesh).  ``reference`` is the
    map against which ``sup_dist`` is measured, defaulting to the full
    ``boundary_values`` array when one is given.

    Returns ``(DiscreteMap, SolveReport)``; an exhausted iteration budget
    yields ``converged=False`` rather than an error.
    """
    N = len(mesh)
    B = np.asarray(boundary_values, dtype=float)
    if len(B) == N:
        F = np.array(B if initial is None else initial, dtype=float)
        F[mesh.boundary] = B[mesh.boundary]
        ref = B if reference is None else np.asarray(reference, dtype=float)
    elif len(B) == int(mesh.boundary.sum()):
        if initial is None:
            raise ValueError("an initial map is needed when only boundary values are given")
        F = np.array(initial, dtype=float)
        F[mesh.boundary] = B
        ref = reference
    else:
        raise ValueError("boundary_values must cover all vertices or exactly the boundary")
    if method not in ("preconditioned", "jacobi"):
        raise ValueError(f"unknown method {method!r}")
    precond = _Preconditioner(mesh) if method == "preconditioned" else None
    E = energy(mesh, F)
    T = tension(mesh, F)
    res = float(np.max(mink_norm(T)) / mesh.a) if N else 0.0
    etr, rtr, st = [E], [res], [0.0]
    it = 0
    jacobi = _Jacobi(mesh)
    directions = [precond, jacobi] if precond is not None else [jacobi]
    while res > tol and it < max_iters:
        accepted = False
        for direction in directions:
            X = project_to_tangent(F, direction(F, T))
            step = eta
            while step >= 1e-6:
                with np.errstate(over="ignore", invalid="ignore"):
                    Fn = exp_map(F, step * X)
                Fn[mesh.boundary] = F[mesh.boundary]
                if not np.all(np.isfinite(Fn)):
                    step *= 0.5
                    continue
                En = energy(mesh, Fn)
                Tn = tension(mesh, Fn)
                rn = float(np.max(mink_norm(Tn)) / mesh.a)
                if En <= E * (1 + 1e-13) + 1e-15 and rn <= res:
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                break
        if not accepted:
            break
        it += 1
        F, E, T, res = Fn, En, Tn, rn
        etr.append(E)
        rtr.append(res)
        st.append(step)
    sup = float(np.max(unit_distance(F[mesh.interior], ref[mesh.interior]) / mesh.a)) \
        if ref is not None and len(mesh.interior) else float("nan")
    rep = SolveReport(it, res, sup, bool(res <= tol), etr, rtr, st, mesh.radius,
                      method)
    return DiscreteMap(mesh.points, F, mesh.indptr, mesh.indices, mesh.a), rep


# ---------------------------------------------------------------------------
# Schoen-Yau check


@dataclass
class SchoenYauReport:
    laplacian: np.ndarray
    bound: np.ndarray
    slack: float
    probes: np.ndarray = field(repr=False)

    @property
    def violations(self) -> np.ndarray:
        return self.probes[self.laplacian < -self.bound - self.slack]

    @property
    def fraction_ok(self) -> float:
        return float(np.mean(self.laplacian >= -self.bound - self.slack)) if len(self.probes) else 1.0

    def to_dict(self):
        return {"probes": len(self.probes), "fraction_ok": self.fraction_ok,
                "violations": self.violations.tolist(), "slack": self.slack,
                "min_margin": float(np.min(self.laplacian + self.bound)) if len(self.probes) else 0.0}


def schoen_yau_check(hvals, rvals, mesh: BallMesh, slack: float = 0.05,
                     margin: float | None = None) -> SchoenYauReport:
    """Mesh Laplacian of ``dist(h, r)`` against ``-(|tau h| + |tau r|)`` at interior vertices.

    By convexity of the distance on a product of Hadamard spaces the
    inequality holds exactly for the discrete Laplacian with nonnegative
    weights, so violations beyond rounding flag a broken mesh or map.
    Probes are interior vertices at least ``margin`` (default h) inside.
    """
    H = np.asarray(getattr(hvals, "values", hvals), dtype=float)
    R = np.asarray(getattr(rvals, "values", rvals), dtype=float)
    g = unit_distance(H, R) / mesh.a
    lap = mesh.laplacian(g)
    bound = tension_norm(mesh, H) + tension_norm(mesh, R)
    margin = mesh.h if margin is None else margin
    depth = mesh.radius - mesh.distance_from_center()
    probes = np.nonzero(~mesh.boundary & (depth >= margin))[0]
    # where h and r coincide the distance is not differentiable; the inequality
    # still holds for the one-sided convex combination used here
    return SchoenYauReport(lap[probes], bound[probes], slack, probes)


# ---------------------------------------------------------------------------
# sweeps


def transfer(prev: DiscreteMap, mesh: BallMesh, fallback) -> np.ndarray:
    """Nearest-vertex transfer of a previous solution onto a larger mesh."""
    tree = cKDTree(to_poincare(prev.points))
    dist, idx = tree.query(to_poincare(mesh.points))
    vals = np.asarray(fallback, dtype=float).copy()
    r_prev = unit_distance(mesh.points, prev.points[0][None]) / mesh.a
    inside = r_prev < unit_distance(prev.points, prev.points[0][None]).max() / mesh.a - 1e-9
    vals[inside] = prev.values[idx[inside]]
    return vals


@dataclass
class SweepReport:
    d_grid: list
    reports: list
    maps: list = field(repr=False)
    meshes: list = field(repr=False)

    @property
    def sup_dist(self) -> list:
        return [r.sup_dist for r in self.reports]

    @property
    def flagged(self) -> bool:
        return not all(r.converged for r in self.reports)

    @property
    def plateau_pair(self) -> tuple:
        """Index of the grid point nearest ``d_max / 1.5`` and of ``d_max``."""
        d = np.asarray(self.d_grid, dtype=float)
        last = len(d) - 1
        prev = int(np.argmin(np.abs(d[:-1] - d[-1] / 1.5))) if last > 0 else 0
        return prev, last

    @property
    def plateau_ratio(self) -> float:
        i, j = self.plateau_pair
        s = self.sup_dist
        if s[i] == 0:
            return 0.0 if s[j] == 0 else float("inf")
        return float(s[j] / s[i])

    @property
    def plateau(self) -> bool:
        i, j = self.plateau_pair
        s = self.sup_dist
        return bool(s[j] <= 1.1 * s[i] + 1e-12)

    def to_dict(self):
        return {"d_grid": list(map(float, self.d_grid)), "sup_dist": self.sup_dist,
                "plateau_ratio": self.plateau_ratio, "plateau": self.plateau,
                "flagged": self.flagged, "reports": [r.to_dict() for r in self.reports]}


def ball_sweep(rmap: Callable, center, d_grid, h: float, tol: float = 1e-6, a: float = 1.0,
               max_iters: int = 200, method: str = "preconditioned") -> SweepReport:
    """Solve on nested balls ``B(center, d)``, warm-starting each from the previous one."""
    d_grid = [float(d) for d in d_grid]
    if any(b <= a_ for a_, b in zip(d_grid, d_grid[1:])):
        raise ValueError("d_grid must be increasing")
    center = np.asarray(center, dtype=float)
    reports, maps, meshes = [], [], []
    prev = None
    for d in d_grid:
        mesh = mesh_ball(center, d, h, a)
        R = np.asarray(rmap(mesh.points), dtype=float)
        init = None if prev is None else transfer(prev, mesh, R)
        hmap, rep = dirichlet_solve(mesh, R, tol, max_iters, initial=init, method=method)
        reports.append(rep)
        maps.append(hmap)
        meshes.append(mesh)
        prev = hmap
    return SweepReport(d_grid, reports, maps, meshes)


def measure_c_prime(mesh: BallMesh, rvals, dist, c: float) -> float:
    """Smallest C' with ``|tau(r)| <= C' c e^{-a dist}`` at the interior vertices."""
    t = tension_norm(mesh, np.asarray(getattr(rvals, "values", rvals), dtype=float))
    I = mesh.interior
    return float(np.max(t[I] * np.exp(mesh.a * np.asarray(dist)[I]) / c)) if len(I) else 0.0


__all__ = ["BallMesh", "mesh_ball", "tension", "tension_norm", "energy", "SolveReport",
           "dirichlet_solve", "SchoenYauReport", "schoen_yau_check", "transfer", "SweepReport",
           "ball_sweep", "measure_c_prime"]
