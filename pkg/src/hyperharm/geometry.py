"""Constant-curvature hyperbolic geometry in the hyperboloid model.

Points of H^n are arrays of shape ``(..., n+1)`` on the upper sheet
``<x, x> = -1`` of Minkowski space with signature (-, +, ..., +).  The space
of curvature ``-a**2`` shares these coordinates with the unit-curvature
model; only lengths change, by a factor ``1/a``.  Tangent vectors are
ambient vectors orthogonal to their base point; ``exp_map`` and ``log_map``
work on unit-model lengths, while ``distance`` and ``tangent_norm`` return
Riemannian lengths for the requested ``a``.

Ideal points are null vectors normalized to first coordinate 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .streams import RandomStream, as_stream

ALG_TOL = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceConfig:
    n: int = 2
    a: float = 1.0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise GeometryError(f"dimension n must be 2 or 3, got {self.n}")
        if not self.a > 0:
            raise GeometryError(f"curvature scale a must be positive, got {self.a}")


# ---------------------------------------------------------------------------
# Minkowski primitives


def mink_inner(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise GeometryError(f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


def minkowski_form(dim: int) -> np.ndarray:
    J = np.eye(dim)
    J[0, 0] = -1.0
    return J


def mink_norm(v):
    return np.sqrt(np.maximum(mink_inner(v, v), 0.0))


def tangent_norm(v, a: float = 1.0):
    return mink_norm(v) / a


def origin(n: int) -> np.ndarray:
    o = np.zeros(n + 1)
    o[0] = 1.0
    return o


def check_point(x, tol: float = ALG_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    q = mink_inner(x, x)
    if np.any(np.abs(q + 1.0) > tol * np.maximum(1.0, x[..., 0] ** 2)) or np.any(x[..., 0] <= 0):
        raise GeometryError("not a point of the upper hyperboloid sheet")
    return x


def project_to_hyperboloid(x) -> np.ndarray:
    """Rescale future-timelike vectors back onto ``<x,x> = -1``."""
    x = np.asarray(x, dtype=float)
    q = -mink_inner(x, x)
    if np.any(q <= 0):
        raise GeometryError("vector is not timelike")
    return x / np.sqrt(q)[..., None]


def lift(spatial) -> np.ndarray:
    """Point of the hyperboloid with the given spatial coordinates."""
    s = np.asarray(spatial, dtype=float)
    x0 = np.sqrt(1.0 + np.sum(s * s, axis=-1))
    return np.concatenate([x0[..., None], s], axis=-1)


def polar_point(direction, r: float, a: float = 1.0) -> np.ndarray:
    """Point at Riemannian distance ``r`` from the origin along ``direction``."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    s = np.broadcast_to(a * np.asarray(r, dtype=float), d.shape[:-1])
    return np.concatenate([np.cosh(s)[..., None], np.sinh(s)[..., None] * d], axis=-1)


def unit_distance(x, y):
    """Unit-curvature distance; raises on invalid pairs.

    Rounding in ``<x, y>`` scales with ``x_0 y_0``, which is what the validity
    test allows for.  Close pairs use ``2 asinh(|x - y| / 2)``, which keeps
    full relative accuracy where ``arccosh`` near 1 does not.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = -mink_inner(x, y)
    scale = np.maximum(1.0, np.abs(x[..., 0] * y[..., 0]))
    if np.any(c < 1.0 - ALG_TOL * scale):
        raise GeometryError("-<x,y> < 1: invalid points")
    d = np.arccosh(np.maximum(c, 1.0))
    near = c < 1.5
    if np.any(near):
        diff = x - y
        s = np.sqrt(np.maximum(mink_inner(diff, diff), 0.0))
        d = np.where(near, 2.0 * np.arcsinh(0.5 * s), d)
    return d


def distance(x, y, a: float = 1.0):
    return unit_distance(x, y) / a


# ---------------------------------------------------------------------------
# exp / log


def exp_map(x, v) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    t = mink_norm(v)
    small = t < 1e-12
    tt = np.where(small, 1.0, t)
    coef = np.where(small, 1.0, np.sinh(tt) / tt)
    out = np.cosh(t)[..., None] * x + coef[..., None] * v
    return out


def log_map(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = -mink_inner(x, y)
    d = np.arccosh(np.maximum(c, 1.0))
    u = y - c[..., None] * x
    # |u|_M = sinh(d); d/sinh(d) -> 1 as d -> 0
    sh = np.sinh(d)
    small = d < 1e-8
    coef = np.where(small, 1.0, d / np.where(small, 1.0, sh))
    return coef[..., None] * u


def project_to_tangent(x, v) -> np.ndarray:
    return v + mink_inner(x, v)[..., None] * x


# ---------------------------------------------------------------------------
# isometries


def boost_to(x) -> np.ndarray:
    """Transvection matrix along the geodesic from the origin to ``x``."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    s = x[1:]
    M = np.empty((dim, dim))
    M[0, 0] = x[0]
    M[0, 1:] = s
    M[1:, 0] = s
    M[1:, 1:] = np.eye(dim - 1) + np.outer(s, s) / (1.0 + x[0])
    return M


def tangent_frame(x) -> np.ndarray:
    """Orthonormal tangent frame at ``x``, shape ``(..., n, n+1)``.

    Obtained by transporting the standard frame at the origin along the
    geodesic to ``x``; it varies smoothly with ``x``.
    """
    x = np.asarray(x, dtype=float)
    s = x[..., 1:]
    n = s.shape[-1]
    # columns 1..n of boost_to(x), vectorized
    E = np.empty(x.shape[:-1] + (n, n + 1))
    E[..., :, 0] = s
    E[..., :, 1:] = np.eye(n) + s[..., :, None] * s[..., None, :] / (1.0 + x[..., 0])[..., None, None]
    return E


def transvection(x, y) -> np.ndarray:
    """Isometry translating along the geodesic through ``x`` and ``y``, mapping x to y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = log_map(x, y)
    s = mink_norm(v)
    dim = x.shape[-1]
    if s < 1e-15:
        return np.eye(dim)
    u = v / s
    J = minkowski_form(dim)
    # M w = w + (cosh s - 1)(-<w,x> x + <w,u> u) + sinh s (-<w,x> u + <w,u> x)
    xl = J @ x
    ul = J @ u
    M = (np.eye(dim)
         + (np.cosh(s) - 1.0) * (-np.outer(x, xl) + np.outer(u, ul))
         + np.sinh(s) * (-np.outer(u, xl) + np.outer(x, ul)))
    return M


@dataclass(frozen=True)
class Isometry:
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        J = minkowski_form(M.shape[0])
        if M.shape[0] != M.shape[1] or not np.allclose(M.T @ J @ M, J, atol=1e-9 * max(1.0, np.abs(M).max() ** 2)):
            raise GeometryError("matrix does not preserve the Minkowski form")
        if M[0, 0] <= 0:
            raise GeometryError("matrix reverses time orientation")
        object.__setattr__(self, "matrix", M)

    @classmethod
    def identity(cls, n: int) -> "Isometry":
        return cls(np.eye(n + 1))

    def apply(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T

    def apply_ideal(self, p) -> np.ndarray:
        return normalize_ideal(self.apply(p))

    def inverse(self) -> "Isometry":
        J = minkowski_form(self.matrix.shape[0])
        return Isometry(J @ self.matrix.T @ J)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return Isometry(self.matrix @ other.matrix)

    def to_json(self):
        return self.matrix.tolist()


def random_rotation(rng: RandomStream, n: int) -> np.ndarray:
    """Haar-random element of SO(n) (QR of a Gaussian matrix, sign-fixed)."""
    g = as_stream(rng).gen
    A = g.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_far_isometry(rng, t: float, n: int = 3, a: float = 1.0) -> Isometry:
    """Uniform rotation about the origin followed by a translation of length ``t``.

    The translation axis is a uniformly random direction through the origin.
    """
    if t < 0:
        raise GeometryError("translation length must be nonnegative")
    rng = as_stream(rng)
    R = np.eye(n + 1)
    R[1:, 1:] = random_rotation(rng, n)
    axis = rng.gen.standard_normal(n)
    axis /= np.linalg.norm(axis)
    T = boost_to(polar_point(axis, t, a))
    return Isometry(T @ R)


# ---------------------------------------------------------------------------
# ideal points and geodesics


def ideal_point(direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    return np.concatenate([np.ones(d.shape[:-1] + (1,)), d], axis=-1)


def normalize_ideal(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p[..., 0] <= 0):
        raise GeometryError("ideal point must be future-pointing")
    p = p / p[..., :1]
    # re-project the spatial part onto the unit sphere to remove drift
    s = p[..., 1:] / np.linalg.norm(p[..., 1:], axis=-1, keepdims=True)
    return np.concatenate([np.ones(p.shape[:-1] + (1,)), s], axis=-1)


def check_ideal(p, tol: float = ALG_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(np.abs(mink_inner(p, p)) > tol) or np.any(np.abs(p[..., 0] - 1.0) > tol):
        raise GeometryError("not a normalized ideal point")
    return p


@dataclass(frozen=True)
class GeodesicLine:
    """Bi-infinite line (two ideal endpoints), ray (point, ideal) or segment (two points)."""

    start: np.ndarray = field(repr=False)
    end: np.ndarray = field(repr=False)
    kind: str = "line"

    def __post_init__(self):
        if self.kind not in ("line", "ray", "segment"):
            raise GeometryError(f"unknown geodesic kind {self.kind!r}")
        p = np.asarray(self.start, dtype=float)
        q = np.asarray(self.end, dtype=float)
        if self.kind == "line":
            p, q = normalize_ideal(p), normalize_ideal(q)
            if -mink_inner(p, q) < 1e-14:
                raise GeometryError("degenerate line: coincident endpoints")
        elif self.kind == "ray":
            p, q = check_point(p), normalize_ideal(q)
        else:
            check_point(p), check_point(q)
            if -mink_inner(p, q) - 1.0 < 1e-15:
                raise GeometryError("degenerate segment: coincident endpoints")
        object.__setattr__(self, "start", p)
        object.__setattr__(self, "end", q)

    @classmethod
    def through(cls, x, y) -> "GeodesicLine":
        """The bi-infinite line containing two distinct points."""
        v = log_map(x, y)
        u = v / mink_norm(v)
        return cls(normalize_ideal(x - u), normalize_ideal(x + u), "line")

    def base_and_direction(self):
        """Arclength origin and unit tangent there.

        Lines start at the point nearest the model origin; rays and segments
        start at their first point.
        """
        p, q = self.start, self.end
        if self.kind == "line":
            o = origin(p.shape[-1] - 1)
            base, _ = _foot_on_line(o, p, q)
            base = base[0] if base.ndim > 1 else base
            u = q + mink_inner(base, q) * base
            return base, u / mink_norm(u)
        if self.kind == "ray":
            u = q + mink_inner(p, q) * p
            return p, u / mink_norm(u)
        v = log_map(p, q)
        return p, v / mink_norm(v)

    def length(self, a: float = 1.0) -> float:
        if self.kind == "segment":
            return float(distance(self.start, self.end, a))
        return np.inf

    def point(self, t, a: float = 1.0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind != "line":
            lo = 0.0
            hi = self.length(a)
            if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
                raise GeometryError("parameter outside the geodesic's domain")
        base, u = self.base_and_direction()
        s = a * t
        return np.cosh(s)[..., None] * base + np.sinh(s)[..., None] * u

    def to_json(self):
        return {"kind": self.kind, "start": self.start.tolist(), "end": self.end.tolist()}


def _foot_on_line(x, p, q):
    """cosh of the unit distance from points ``x`` to the line (p, q) and the feet."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pq = -mink_inner(p, q)
    al = -mink_inner(x, p)
    be = -mink_inner(x, q)
    scale = np.sqrt(2.0 * pq)
    # feet: e^s p' + e^{-s} q' with p' = p/scale, q' = q/scale, e^{2s} = be/al
    es = np.sqrt(be / al)
    feet = (es[:, None] * p + q / es[:, None]) / scale
    cosh_d = 2.0 * np.sqrt(al * be) / scale
    return feet, np.maximum(cosh_d, 1.0)


def dist_to_line(x, line: GeodesicLine, a: float = 1.0):
    """Distance from point(s) ``x`` to a geodesic, and the foot point(s)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if line.kind == "line":
        feet, ch = _foot_on_line(X, line.start, line.end)
    else:
        base, u = line.base_and_direction()
        A = -mink_inner(X, base)
        B = mink_inner(X, u)
        # -<x, cosh s base + sinh s u> = A cosh s - B sinh s, minimized at tanh s = B/A
        s = np.arctanh(np.clip(B / A, -1 + 1e-16, 1 - 1e-16))
        hi = line.length(1.0) if line.kind == "segment" else np.inf
        s = np.clip(s, 0.0, hi)
        feet = np.cosh(s)[:, None] * base + np.sinh(s)[:, None] * u
        ch = np.maximum(A * np.cosh(s) - B * np.sinh(s), 1.0)
    d = np.arccosh(ch) / a
    if single:
        return float(d[0]), feet[0]
    return d, feet


def visual_distance(base, y, z):
    """``exp(-a * dist(base, [y, z]))``; independent of ``a`` in these coordinates."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    yz = -mink_inner(y, z)
    if np.any(yz < 1e-15):
        raise GeometryError("visual distance needs distinct ideal points")
    al = -mink_inner(base, y)
    be = -mink_inner(base, z)
    ch = np.maximum(np.sqrt(2.0 * al * be / yz), 1.0)
    # e^{-arccosh c} = c - sqrt(c^2 - 1) = 1 / (c + sqrt(c^2 - 1))
    return 1.0 / (ch + np.sqrt(ch * ch - 1.0))


# ---------------------------------------------------------------------------
# volume and sampling


def sphere_area(n: int) -> float:
    """Area of the unit (n-1)-sphere."""
    return {1: 2.0, 2: 2 * np.pi, 3: 4 * np.pi}[n]


def ball_volume(cfg: SpaceConfig, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    a = cfg.a
    if np.any(r < 0):
        raise GeometryError("radius must be nonnegative")
    if cfg.n == 2:
        return 2 * np.pi * (np.cosh(a * r) - 1.0) / a**2
    return np.pi * (np.sinh(2 * a * r) - 2 * a * r) / a**3


def _radial_cdf_inverse(cfg: SpaceConfig, u, r_in: float, r_out: float) -> np.ndarray:
    """Radius with density proportional to sinh(a s)^(n-1) on [r_in, r_out]."""
    a = cfg.a
    lo = float(ball_volume(cfg, r_in))
    hi = float(ball_volume(cfg, r_out))
    target = lo + u * (hi - lo)
    if cfg.n == 2:
        return np.arccosh(1.0 + target * a**2 / (2 * np.pi)) / a
    # invert pi (sinh 2as - 2as)/a^3 = target by safeguarded Newton
    goal = target * a**3 / np.pi
    w = np.full_like(goal, 2 * a * (r_in + r_out) / 2)
    wlo = np.full_like(goal, 2 * a * r_in)
    whi = np.full_like(goal, 2 * a * r_out)
    for _ in range(100):
        f = np.sinh(w) - w - goal
        wlo = np.where(f < 0, w, wlo)
        whi = np.where(f >= 0, w, whi)
        fp = np.cosh(w) - 1.0
        step = w - f / np.where(fp > 1e-300, fp, 1e-300)
        bad = (step <= wlo) | (step >= whi) | ~np.isfinite(step)
        w_new = np.where(bad, 0.5 * (wlo + whi), step)
        if np.max(np.abs(w_new - w)) < 1e-15 * max(1.0, float(np.max(w))):
            w = w_new
            break
        w = w_new
    return w / (2 * a)


def random_directions(rng, count: int, n: int) -> np.ndarray:
    g = as_stream(rng).gen
    d = g.standard_normal((count, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def sample_annulus_uniform(rng, center, r_in: float, r_out: float, count: int,
                           cfg: SpaceConfig) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples of the Riemannian volume on B(center, r_out) minus B(center, r_in).

    Returns the points and their distances from ``center``.
    """
    rng = as_stream(rng)
    u = rng.gen.random(count)
    rad = _radial_cdf_inverse(cfg, u, r_in, r_out)
    dirs = random_directions(rng, count, cfg.n)
    local = polar_point(dirs, rad, cfg.a)
    pts = local @ boost_to(np.asarray(center, dtype=float)).T
    return pts, rad


def sample_ball_uniform(rng, center, r: float, count: int, cfg: SpaceConfig) -> np.ndarray:
    if r <= 0 or count < 1:
        raise GeometryError("need r > 0 and count >= 1")
    pts, _ = sample_annulus_uniform(rng, center, 0.0, r, count, cfg)
    return pts


# ---------------------------------------------------------------------------
# finite differences


def stencil_points(x, h: float, a: float = 1.0, frame=None) -> np.ndarray:
    """Points ``x, exp_x(+h e_i), exp_x(-h e_i)``; shape ``(..., 2n+1, n+1)``."""
    x = np.asarray(x, dtype=float)
    E = tangent_frame(x) if frame is None else np.asarray(frame, dtype=float)
    s = a * h
    plus = np.cosh(s) * x[..., None, :] + np.sinh(s) * E
    minus = np.cosh(s) * x[..., None, :] - np.sinh(s) * E
    return np.concatenate([x[..., None, :], plus, minus], axis=-2)


def fd_laplacian(f, x, h: float = 0.01, a: float = 1.0, frame=None):
    """Second-difference Laplacian of a scalar field over an orthonormal frame.

    ``f`` maps an array of points ``(k, n+1)`` to values ``(k,)``.  ``x`` may be a
    single point or a batch.
    """
    if not 0 < h <= 0.2:
        raise GeometryError("step h must lie in (0, 0.2]")
    x = np.asarray(x, dtype=float)
    P = stencil_points(x, h, a, frame)
    n = x.shape[-1] - 1
    vals = np.asarray(f(P.reshape(-1, n + 1)), dtype=float).reshape(P.shape[:-1])
    lap = (vals[..., 1:].sum(axis=-1) - 2 * n * vals[..., 0]) / h**2
    return lap


def fd_gradient_norm(f, x, h: float = 0.01, a: float = 1.0, frame=None):
    x = np.asarray(x, dtype=float)
    P = stencil_points(x, h, a, frame)
    n = x.shape[-1] - 1
    vals = np.asarray(f(P.reshape(-1, n + 1)), dtype=float).reshape(P.shape[:-1])
    g = (vals[..., 1:n + 1] - vals[..., n + 1:]) / (2 * h)
    return np.sqrt(np.sum(g * g, axis=-1))


def fd_tension(fmap, x, h: float = 0.01, a: float = 1.0, frame=None):
    """Finite-difference tension field of a map into a hyperboloid target.

    Returns ambient tangent vectors at ``fmap(x)``, in unit-model lengths
    scaled to Riemannian units of the domain.
    """
    x = np.asarray(x, dtype=float)
    P = stencil_points(x, h, a, frame)
    dim = x.shape[-1]
    vals = np.asarray(fmap(P.reshape(-1, dim)), dtype=float)
    tdim = vals.shape[-1]
    vals = vals.reshape(P.shape[:-1] + (tdim,))
    c = vals[..., :1, :]
    logs = log_map(np.broadcast_to(c, vals[..., 1:, :].shape), vals[..., 1:, :])
    return logs.sum(axis=-2) / h**2


# ---------------------------------------------------------------------------
# model transforms


def to_poincare(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / (1.0 + x[..., :1])


def from_poincare(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    r2 = np.sum(b * b, axis=-1, keepdims=True)
    return np.concatenate([(1 + r2) / (1 - r2), 2 * b / (1 - r2)], axis=-1)


def poincare_ball_of(x, r: float, a: float = 1.0):
    """Euclidean center and radius of the Poincare image of the metric ball B(x, r)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = np.arccosh(np.maximum(x[:, 0], 1.0))
    b = to_poincare(x)
    nb = np.linalg.norm(b, axis=1)
    dirn = np.where(nb[:, None] > 0, b / np.where(nb > 0, nb, 1.0)[:, None], 0.0)
    dirn[nb == 0, 0] = 1.0
    far = np.tanh((s + a * r) / 2)
    near = np.tanh((s - a * r) / 2)
    return dirn * ((far + near) / 2)[:, None], (far - near) / 2
