"""Smoothing of maps into hyperbolic space by flattening around a colored separated net.

For each net center ``c`` with current value ``A = f(c)``, flattening replaces
``f(z)`` by ``exp_A(chi(dist(c, z) / r) log_A f(z))``: the map becomes
constant on ``B(c, r/2)`` and is unchanged outside ``B(c, r)``.  Centers
are processed one color class at a time; within a class the balls are
disjoint, so the order inside a class is irrelevant.
"""

from __future__ import annotations

import io
import itertools
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .fitting import decay_fit
from .geometry import GeometryError, exp_map, log_map, tangent_frame, unit_distance
from .hull import GeodesicHull, dist_to_hull, retract
from .spatial import BallIndex


def chi(u):
    """C^2 cutoff: 0 for ``|u| <= 1/2``, 1 for ``|u| >= 1``, quintic smoothstep between."""
    t = np.clip((np.abs(np.asarray(u, dtype=float)) - 0.5) * 2.0, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def ball_lattice(center, radius: float, spacing: float, a: float = 1.0) -> np.ndarray:
    """Images under ``exp_center`` of the cubic lattice of the given spacing inside ``radius``."""
    center = np.asarray(center, dtype=float)
    n = len(center) - 1
    k = int(np.floor(radius / spacing))
    ticks = spacing * np.arange(-k, k + 1)
    grid = np.array(list(itertools.product(ticks, repeat=n)))
    grid = grid[np.linalg.norm(grid, axis=1) <= radius + 1e-12]
    E = tangent_frame(center)
    V = a * grid @ E
    return exp_map(np.broadcast_to(center, V.shape), V)


@dataclass
class Region:
    """Union of metric balls ``B(centers[i], radii[i])``."""

    centers: np.ndarray
    radii: np.ndarray
    a: float = 1.0

    def depth(self, z) -> np.ndarray:
        """How far inside the region each point lies (negative outside)."""
        Z = np.atleast_2d(np.asarray(z, dtype=float))
        d = unit_distance(Z[:, None, :], self.centers[None, :, :]) / self.a
        return np.max(self.radii[None, :] - d, axis=1)

    def mesh(self, spacing: float) -> np.ndarray:
        pts = [ball_lattice(c, r, spacing, self.a) for c, r in zip(self.centers, self.radii)]
        return np.concatenate(pts)


def probe_region(probes, radius: float, a: float = 1.0) -> Region:
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    return Region(P, np.full(len(P), float(radius)), a)


# ---------------------------------------------------------------------------
# nets


@dataclass
class SeparatedNet:
    centers: np.ndarray = field(repr=False)
    r: float
    colors: np.ndarray | None = field(default=None, repr=False)
    a: float = 1.0

    def __len__(self):
        return len(self.centers)

    @property
    def n_colors(self) -> int:
        return 0 if self.colors is None else int(self.colors.max()) + 1

    def classes(self):
        if self.colors is None:
            raise GeometryError("net is not colored")
        return [np.nonzero(self.colors == c)[0] for c in range(self.n_colors)]


def _mesh_spacing(points) -> float:
    from .geometry import to_poincare
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        return 0.0
    tree = cKDTree(to_poincare(P))
    _, idx = tree.query(to_poincare(P), k=2)
    return float(np.median(unit_distance(P, P[idx[:, 1]])))


def build_net(mesh, r: float, a: float = 1.0, spacing: float | None = None,
              order=None) -> SeparatedNet:
    """Greedy maximal ``r/2``-separated subset of the mesh vertices (in mesh order)."""
    P = np.atleast_2d(np.asarray(mesh, dtype=float))
    if len(P) == 1:
        return SeparatedNet(P.copy(), r, None, a)
    h = (_mesh_spacing(P) / a) if spacing is None else spacing
    if not r > 2 * h:
        raise GeometryError(f"net scale r={r:g} must exceed twice the mesh spacing {h:g}")
    idx = BallIndex(P, a)
    indptr, indices = idx.pairs(r / 2 * (1 - 1e-12))
    order = np.arange(len(P)) if order is None else np.asarray(order)
    chosen = _backend.greedy_select(indptr, indices, order)
    return SeparatedNet(P[chosen], r, None, a)


def audit_net(net: SeparatedNet, mesh=None, tol: float = 1e-9) -> dict:
    C = net.centers
    idx = BallIndex(C, net.a)
    ip, ix = idx.pairs(net.r / 2 * (1 - 1e-12))
    ok_sep = len(ix) == 0
    out = {"separated": bool(ok_sep)}
    if mesh is not None:
        M = np.atleast_2d(mesh)
        ip2, _ = idx.query(M, net.r / 2 + tol)
        out["maximal"] = bool(np.all(np.diff(ip2) > 0))
    if net.colors is not None:
        ok = True
        for cls in net.classes():
            if len(cls) > 1:
                ipc, ixc = BallIndex(C[cls], net.a).pairs(2 * net.r * (1 - 1e-12))
                ok &= len(ixc) == 0
        out["classes_separated"] = bool(ok)
    return out


def color_net(net: SeparatedNet) -> SeparatedNet:
    """Greedy coloring of the conflict graph (centers closer than 2r conflict)."""
    if len(net) == 1:
        return SeparatedNet(net.centers, net.r, np.zeros(1, dtype=np.int64), net.a)
    idx = BallIndex(net.centers, net.a)
    indptr, indices = idx.pairs(2 * net.r * (1 - 1e-12))
    colors = _backend.greedy_color(indptr, indices)
    return SeparatedNet(net.centers, net.r, colors, net.a)


# ---------------------------------------------------------------------------
# flattening


def flatten_values(points, values, center, anchor, r: float, a: float = 1.0) -> np.ndarray:
    """Flatten ``values`` (at ``points``) around one center with anchor value ``anchor``."""
    points = np.atleast_2d(points)
    values = np.atleast_2d(values)
    d = unit_distance(points, center) / a
    w = chi(d / r)
    out = values.copy()
    near = d < r
    if np.any(near):
        A = np.broadcast_to(anchor, values[near].shape)
        v = log_map(A, values[near])
        out[near] = exp_map(A, w[near][:, None] * v)
    return out


def local_flatten(f: "DiscreteMap", x, r: float) -> "DiscreteMap":
    """Flatten a discrete map around the point x (anchor: its interpolated value)."""
    anchor = f.evaluate(np.asarray(x, dtype=float)[None])[0]
    vals = flatten_values(f.points, f.values, x, anchor, r, f.a)
    return DiscreteMap(f.points, vals, f.indptr, f.indices, f.a)


class SmoothedMap:
    """Flattened version of ``base`` evaluable at arbitrary points.

    Anchor values ``f_c(x)`` of the centers in class c are computed once, in
    class order; evaluating at z then replays the flattenings of the (at
    most one per class) centers within r of z.
    """

    def __init__(self, base: Callable, net: SeparatedNet):
        if net.colors is None:
            net = color_net(net)
        self.base = base
        self.net = net
        self.classes = net.classes()
        self.index = [BallIndex(net.centers[c], net.a) for c in self.classes]
        self.anchors = np.empty((len(net), 0))
        anchors = None
        for k, cls in enumerate(self.classes):
            vals = self._apply(net.centers[cls], upto=k, anchors=anchors)
            if anchors is None:
                anchors = np.zeros((len(net), vals.shape[1]))
            anchors[cls] = vals
        self.anchors = anchors

    def _apply(self, Z, upto: int, anchors) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        V = np.atleast_2d(np.asarray(self.base(Z), dtype=float)).copy()
        r, a = self.net.r, self.net.a
        for k in range(upto):
            cls = self.classes[k]
            indptr, indices = self.index[k].query(Z, r * (1 - 1e-12))
            rows = np.nonzero(np.diff(indptr))[0]
            if len(rows) == 0:
                continue
            which = cls[indices[indptr[rows]]]
            d = unit_distance(Z[rows], self.net.centers[which]) / a
            A = anchors[which]
            v = log_map(A, V[rows])
            V[rows] = exp_map(A, chi(d / r)[:, None] * v)
        return V

    def __call__(self, Z) -> np.ndarray:
        return self._apply(Z, len(self.classes), self.anchors)


def smooth_map(f: "DiscreteMap", r: float, net: SeparatedNet | None = None) -> "DiscreteMap":
    """Class-by-class flattening of a discrete map at its own net vertices."""
    net = color_net(build_net(f.points, r, f.a)) if net is None else net
    if net.colors is None:
        net = color_net(net)
    tree = cKDTree(f.points)
    _, cidx = tree.query(net.centers)
    vals = f.values.copy()
    for cls in net.classes():
        for c in cls:
            vals = flatten_values(f.points, vals, net.centers[c], vals[cidx[c]], r, f.a)
    return DiscreteMap(f.points, vals, f.indptr, f.indices, f.a)


def smoothed_retraction(K: GeodesicHull, region: Region, r: float = 0.4, spacing: float = 0.1,
                        a: float = 1.0) -> SmoothedMap:
    """The smoothed retraction onto the hull on ``region`` (raw retraction elsewhere)."""
    mesh = region.mesh(spacing)
    net = color_net(build_net(mesh, r, a, spacing=spacing))
    return SmoothedMap(lambda Z: retract(Z, K), net)


# ---------------------------------------------------------------------------
# discrete maps


@dataclass
class DiscreteMap:
    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    indptr: np.ndarray | None = field(default=None, repr=False)
    indices: np.ndarray | None = field(default=None, repr=False)
    a: float = 1.0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if len(self.points) != len(self.values):
            raise GeometryError("one value per vertex is required")
        self._tree = None

    @classmethod
    def from_function(cls, fn, points, a: float = 1.0, neighbor_radius: float | None = None):
        P = np.atleast_2d(points)
        ip = ix = None
        if neighbor_radius is not None:
            ip, ix = BallIndex(P, a).pairs(neighbor_radius)
        return cls(P, fn(P), ip, ix, a)

    def evaluate(self, Z) -> np.ndarray:
        """Geodesic-affine interpolation from the ``3(n+1)`` nearest vertices.

        The weights are the minimum-norm affine weights (with nearer vertices
        cheaper) reproducing z's normal coordinates at the nearest vertex;
        values are combined the same way in normal coordinates at the nearest
        vertex's value.  Vertex positions reproduce vertex values exactly, and
        a cloud that surrounds z cannot produce large extrapolating weights.
        """
        from .geometry import to_poincare
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if self._tree is None:
            self._tree = cKDTree(to_poincare(self.points))
        n = self.points.shape[1] - 1
        k = min(3 * (n + 1), len(self.points))
        dd, idx = self._tree.query(to_poincare(Z), k=k)
        idx = np.atleast_2d(idx).reshape(len(Z), k)
        out = np.empty((len(Z), self.values.shape[1]))
        flip = np.r_[-1, np.ones(n)]
        for i, z in enumerate(Z):
            ids = idx[i]
            p0 = self.points[ids[0]]
            if unit_distance(z, p0) < 1e-12 or k == 1:
                out[i] = self.values[ids[0]]
                continue
            E = tangent_frame(p0) * flip
            X = log_map(np.broadcast_to(p0, (k, len(p0))), self.points[ids]) @ E.T
            xz = log_map(p0, z) @ E.T
            D = X - xz
            cost = 1.0 + np.einsum("ij,ij->i", D, D) / max(float(np.min(np.einsum("ij,ij->i", D, D))), 1e-300)
            M = np.vstack([X.T, np.ones(k)])
            MW = M / cost
            lam = np.linalg.lstsq(MW @ M.T, np.r_[xz, 1.0], rcond=None)[0]
            w = (M.T @ lam) / cost
            v0 = self.values[ids[0]]
            lv = log_map(np.broadcast_to(v0, (k, len(v0))), self.values[ids])
            out[i] = exp_map(v0, w @ lv)
        return out

    def __call__(self, Z):
        return self.evaluate(Z)

    def to_json(self) -> str:
        d = {"a": self.a, "points": self.points.tolist(), "values": self.values.tolist()}
        if self.indptr is not None:
            d["indptr"] = self.indptr.tolist()
            d["indices"] = self.indices.tolist()
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMap":
        d = json.loads(text)
        ip = np.asarray(d["indptr"], dtype=np.int64) if "indptr" in d else None
        ix = np.asarray(d["indices"], dtype=np.int64) if "indices" in d else None
        return cls(np.asarray(d["points"]), np.asarray(d["values"]), ip, ix, d.get("a", 1.0))


def sup_displacement(f_before, f_after, points, a: float = 1.0) -> float:
    return float(np.max(unit_distance(f_before(points), f_after(points)) / a))


def max_edge_ratio(points, values, indptr, indices, a: float = 1.0) -> float:
    rows = np.repeat(np.arange(len(points)), np.diff(indptr))
    dp = unit_distance(points[rows], points[indices])
    dv = unit_distance(values[rows], values[indices])
    keep = dp > 1e-12
    return float(np.max(dv[keep] / dp[keep])) if np.any(keep) else 0.0


# ---------------------------------------------------------------------------
# regularity


@dataclass
class RegularityReport:
    dist: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    grad_slope: float
    hess_slope: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("dist_to_hull,grad_norm,hess_norm\n")
        for row in zip(self.dist, self.grad, self.hess):
            buf.write(",".join(f"{v:.10g}" for v in row) + "\n")
        return buf.getvalue()


def fd_derivatives(fmap, x, h: float, a: float = 1.0):
    """Operator-norm estimates of the differential and Hessian of ``fmap`` at x.

    The differential uses central differences along an orthonormal frame.
    The Hessian quadratic form is estimated by second differences along the
    frame vectors and the normalized sums and differences of frame pairs,
    all read in normal coordinates at ``fmap(x)``; its norm is the largest
    of these.
    """
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    E = tangent_frame(x)
    dirs = [E[i] for i in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        dirs.append((E[i] + E[j]) / np.sqrt(2))
        dirs.append((E[i] - E[j]) / np.sqrt(2))
    D = np.array(dirs)
    plus = exp_map(np.broadcast_to(x, D.shape), a * h * D)
    minus = exp_map(np.broadcast_to(x, D.shape), -a * h * D)
    F = np.atleast_2d(fmap(np.vstack([x[None], plus, minus])))
    F0 = F[0]
    Fp, Fm = F[1:1 + len(D)], F[1 + len(D):]
    Lp = log_map(np.broadcast_to(F0, Fp.shape), Fp)
    Lm = log_map(np.broadcast_to(F0, Fm.shape), Fm)
    Et = tangent_frame(F0)
    sig = np.r_[-1.0, np.ones(len(F0) - 1)]
    cp = (Lp * sig) @ Et.T
    cm = (Lm * sig) @ Et.T
    J = (cp[:n] - cm[:n]) / (2 * h * a)
    grad = float(np.linalg.svd(J, compute_uv=False)[0]) if J.size else 0.0
    hvec = (cp + cm) / (h * a) ** 2
    hess = float(np.max(np.linalg.norm(hvec, axis=1)))
    return grad, hess


def regularity_probe(fmap, K: GeodesicHull, probes, h: float = 0.02, a: float = 1.0,
                     region: Region | None = None, fit_window=(1.0, 5.0)) -> RegularityReport:
    """Finite-difference gradient and Hessian norms of a map at probe points.

    Slopes are least-squares fits of the log estimates against the probes'
    hull distance inside ``fit_window``.
    """
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    if region is not None and np.any(region.depth(P) < 2 * h):
        raise GeometryError("probe closer than 2h to the edge of the smoothed region")
    dist = np.atleast_1d(dist_to_hull(P, K, a)[0])
    g = np.empty(len(P))
    H = np.empty(len(P))
    for i, x in enumerate(P):
        g[i], H[i] = fd_derivatives(fmap, x, h, a)
    sel = (dist >= fit_window[0]) & (dist <= fit_window[1])

    def slope(v):
        keep = sel & (v > 0)
        if keep.sum() < 2:
            return float("nan")
        return -decay_fit(dist[keep], v[keep], min_points=2).rate

    return RegularityReport(dist, g, H, slope(g), slope(H))
