"""Finite samples of boundary sets and their covering dimensions.

All covering computations use the visual metric ``exp(-dist(x, [y, z]))``.
A set is first moved so the base point becomes the model origin; there the
visual distance between directions at angle ``theta`` is ``tan(theta / 4)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .geometry import (GeodesicLine, GeometryError, Isometry, boost_to, ideal_point,
                       minkowski_form, normalize_ideal, origin, random_far_isometry)
from .streams import as_stream


class InsufficientScales(ValueError):
    pass


class UndersampledScale(ValueError):
    pass


def _angle_to_visual(theta):
    return np.tan(np.asarray(theta) / 4.0)


def _visual_to_angle(eps):
    return 4.0 * np.arctan(np.asarray(eps))


def directions_at(points, base=None) -> np.ndarray:
    """Unit directions of ideal points as seen from ``base`` (default: origin)."""
    P = np.asarray(points, dtype=float)
    if base is not None:
        base = np.asarray(base, dtype=float)
        if not np.allclose(base, origin(len(base) - 1)):
            T = boost_to(base)
            J = minkowski_form(len(base))
            P = normalize_ideal(P @ (J @ T.T @ J).T)
    return P[:, 1:] / np.linalg.norm(P[:, 1:], axis=1, keepdims=True)


def nn_visual_gaps(dirs) -> np.ndarray:
    tree = cKDTree(dirs)
    dd, _ = tree.query(dirs, k=2)
    chord = np.clip(dd[:, 1], 0.0, 2.0)
    return _angle_to_visual(2 * np.arcsin(chord / 2))


def visual_diameter(dirs, chunk: int = 2048) -> float:
    best = 1.0
    for s in range(0, len(dirs), chunk):
        best = min(best, float(np.min(dirs[s:s + chunk] @ dirs.T)))
    return float(_angle_to_visual(np.arccos(np.clip(best, -1.0, 1.0))))


@dataclass
class BoundarySet:
    points: np.ndarray = field(repr=False)
    resolution: float
    generator: dict

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if len(self.points) >= 2:
            gaps = nn_visual_gaps(self.points[:, 1:])
            if np.min(gaps) <= 0:
                raise GeometryError("boundary sample has repeated points")
        if not self.resolution > 0:
            raise GeometryError("resolution must be positive")

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self):
        return len(self.points)

    def moved(self, g: Isometry) -> "BoundarySet":
        pts = g.apply_ideal(self.points)
        return from_points(pts, {**self.generator, "moved": True})

    def to_json(self) -> str:
        return json.dumps({"generator": self.generator, "resolution": self.resolution,
                           "points": self.points.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "BoundarySet":
        d = json.loads(text)
        return cls(np.asarray(d["points"]), d["resolution"], d["generator"])


def from_points(points, generator=None) -> BoundarySet:
    pts = normalize_ideal(np.asarray(points, dtype=float))
    res = float(np.max(nn_visual_gaps(pts[:, 1:]))) if len(pts) > 1 else 1.0
    return BoundarySet(pts, res, dict(generator or {"kind": "points"}))


# ---------------------------------------------------------------------------
# generators


def _circle_points(phi, n: int) -> np.ndarray:
    d = np.zeros((len(phi), n))
    d[:, 0] = np.cos(phi)
    d[:, 1] = np.sin(phi)
    return ideal_point(d)


def gen_round_circle(m: int, n: int = 3) -> BoundarySet:
    if m < 3:
        raise GeometryError("need m >= 3 points")
    if n != 3:
        raise GeometryError("a round circle in the boundary of H^2 is the whole boundary; use n = 3")
    phi = 2 * np.pi * np.arange(m) / m
    return from_points(_circle_points(phi, 3), {"kind": "circle", "m": m})


def cantor_angles(ratio: float, depth: int) -> np.ndarray:
    """Left endpoints of the level-``depth`` intervals of the ratio-``ratio`` Cantor set on [0, 2 pi)."""
    if not 0 < ratio < 0.5:
        raise GeometryError("Cantor ratio must lie in (0, 1/2)")
    if depth < 1:
        raise GeometryError("depth must be >= 1")
    pos = np.zeros(1)
    length = 2 * np.pi
    for _ in range(depth):
        pos = np.concatenate([pos, pos + (1 - ratio) * length])
        length *= ratio
    return np.sort(pos)


def gen_cantor(ratio: float, depth: int, n: int = 3) -> BoundarySet:
    if n not in (2, 3):
        raise GeometryError("n must be 2 or 3")
    phi = cantor_angles(ratio, depth)
    bs = from_points(_circle_points(phi, n),
                     {"kind": "cantor", "ratio": ratio, "depth": depth, "n": n})
    return bs


def _segments_cross_2d(P):
    """Indices (i, j) of non-adjacent crossing segments of the closed polyline P."""
    m = len(P)
    A = P
    B = np.roll(P, -1, axis=0)
    mid = (A + B) / 2
    half = np.linalg.norm(B - A, axis=1) / 2
    tree = cKDTree(mid)
    hits = []
    for i, cand in enumerate(tree.query_ball_point(mid, 2 * half.max() + 1e-12)):
        for j in cand:
            if j <= i or abs(i - j) <= 1 or (i == 0 and j == m - 1):
                continue
            p, r = A[i], B[i] - A[i]
            q, s = A[j], B[j] - A[j]
            den = r[0] * s[1] - r[1] * s[0]
            if abs(den) < 1e-300:
                continue
            qp = q - p
            t = (qp[0] * s[1] - qp[1] * s[0]) / den
            u = (qp[0] * r[1] - qp[1] * r[0]) / den
            if 0 <= t <= 1 and 0 <= u <= 1:
                hits.append((i, j))
    return hits


def gen_snowflake(roughness: float, depth: int, n: int = 3) -> BoundarySet:
    """Midpoint-displacement quasicircle on the sphere at infinity of H^3.

    Each level inserts the spherical midpoint of every pair of consecutive
    points, pushed sideways within the sphere by ``roughness`` times the chord
    length; the side alternates from one insertion to the next.
    """
    if n != 3:
        raise GeometryError("snowflake curves live in the boundary of H^3")
    if not 0 <= roughness < 0.5:
        raise GeometryError("roughness must lie in [0, 0.5)")
    X = _circle_points(2 * np.pi * np.arange(4) / 4, 3)[:, 1:]
    for _ in range(depth):
        Y = np.roll(X, -1, axis=0)
        mid = X + Y
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        side = np.cross(mid, Y - X)
        side /= np.linalg.norm(side, axis=1, keepdims=True)
        sign = np.where(np.arange(len(X)) % 2 == 0, 1.0, -1.0)
        gap = np.linalg.norm(Y - X, axis=1)
        new = mid + (roughness * gap * sign)[:, None] * side
        new /= np.linalg.norm(new, axis=1, keepdims=True)
        Z = np.empty((2 * len(X), 3))
        Z[0::2] = X
        Z[1::2] = new
        X = Z
    # stereographic projection from the pole farthest from the curve
    pole = -np.sign(np.sum(X[:, 2]) or 1.0) * np.array([0.0, 0.0, 1.0])
    if np.max(X @ pole) > 1 - 1e-6:
        raise GeometryError("snowflake curve reaches the projection pole")
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.cross(pole, e1)
    w = 1.0 / (1.0 - X @ pole)
    plane = np.stack([(X @ e1) * w, (X @ e2) * w], axis=1)
    crossings = _segments_cross_2d(plane)
    if crossings:
        raise GeometryError(f"snowflake self-intersects at depth {depth}: "
                            f"{len(crossings)} crossing segment pairs, first {crossings[0]}")
    return from_points(ideal_point(X), {"kind": "snowflake", "roughness": roughness,
                                        "depth": depth})


# ---------------------------------------------------------------------------
# bent planes


@dataclass(frozen=True)
class BentPlaneFamily:
    """H^2 folded along a geodesic axis by ``theta`` inside H^3.

    In normal position the axis is the x1-axis, the half-plane ``x2 >= 0``
    stays in the plane ``x3 = 0`` and the other half is rotated by ``theta``
    about the axis.  ``placement`` moves the normal position into place.
    """

    theta: float
    placement: np.ndarray = field(default_factory=lambda: np.eye(4), repr=False)

    def __post_init__(self):
        if not 0 <= self.theta < np.pi / 2:
            raise GeometryError("bending angle must lie in [0, pi/2)")
        Isometry(np.asarray(self.placement, dtype=float))

    @property
    def axis(self) -> GeodesicLine:
        P = np.asarray(self.placement)
        p = P @ np.array([1.0, 1.0, 0.0, 0.0])
        q = P @ np.array([1.0, -1.0, 0.0, 0.0])
        return GeodesicLine(p, q)

    def _rot(self, angle):
        R = np.eye(4)
        c, s = np.cos(angle), np.sin(angle)
        R[2:, 2:] = [[c, -s], [s, c]]
        return R


def bent_embed(fam: BentPlaneFamily, x) -> np.ndarray:
    """Image in H^3 of points of H^2 (arrays ``(..., 3)``)."""
    x = np.asarray(x, dtype=float)
    y = np.zeros(x.shape[:-1] + (4,))
    y[..., :3] = x
    low = x[..., 2] < 0
    y[..., 2] = np.where(low, x[..., 2] * np.cos(fam.theta), x[..., 2])
    y[..., 3] = np.where(low, x[..., 2] * np.sin(fam.theta), 0.0)
    return y @ np.asarray(fam.placement).T


def bent_boundary(fam: BentPlaneFamily, m: int) -> BoundarySet:
    phi = 2 * np.pi * np.arange(m) / m
    circ = np.stack([np.ones(m), np.cos(phi), np.sin(phi)], axis=1)
    pts = normalize_ideal(bent_embed(fam, circ))
    return from_points(pts, {"kind": "bent", "theta": fam.theta, "m": m})


def _half_plane_foot(y, lower: bool):
    """Nearest point on {x3 = 0, x2 >= 0} (or x2 <= 0) and its cosh-distance."""
    flat = y.copy()
    flat[..., 3] = 0.0
    foot = flat / np.sqrt(1.0 + y[..., 3] ** 2)[..., None]
    ch = np.sqrt(1.0 + y[..., 3] ** 2)
    wrong = foot[..., 2] > 0 if lower else foot[..., 2] < 0
    axis = y.copy()
    axis[..., 2:] = 0.0
    ax_norm = np.sqrt(np.maximum(axis[..., 0] ** 2 - axis[..., 1] ** 2, 1e-300))
    axis_foot = axis / ax_norm[..., None]
    foot = np.where(wrong[..., None], axis_foot, foot)
    ch = np.where(wrong, ax_norm, ch)
    return foot, ch


def bent_unfold(fam: BentPlaneFamily, y) -> np.ndarray:
    """Nearest-point projection to the bent surface, flattened back into H^2.

    Points equidistant from both half-planes go to the first (``x2 >= 0``) one.
    """
    y = np.asarray(y, dtype=float)
    P = np.asarray(fam.placement)
    J = minkowski_form(4)
    Pinv = J @ P.T @ J
    z = y @ Pinv.T
    f1, c1 = _half_plane_foot(z, lower=False)
    R = fam._rot(-fam.theta)
    z2 = z @ R.T
    f2, c2 = _half_plane_foot(z2, lower=True)
    use2 = c2 < c1
    out = np.where(use2[..., None], f2, f1)
    return out[..., :3]


# ---------------------------------------------------------------------------
# covering numbers and dimension


def covering_number(S: BoundarySet, eps: float, base=None, check: bool = True) -> int:
    """Size of a greedy ``eps``-cover of the sample, in sample order."""
    dirs = directions_at(S.points, base)
    if check:
        res = S.resolution if base is None else float(np.max(nn_visual_gaps(dirs)))
        if len(S) > 1 and eps <= res:
            raise UndersampledScale(f"eps={eps:g} is not above the sample resolution {res:g}")
    return _cover_count(dirs, eps)


def _cover_count(dirs, eps) -> int:
    if eps >= 1.0:
        return 1
    thresh = np.cosh(np.log(1.0 / eps)) ** 2
    alpha = np.ones(len(dirs))
    return len(_backend.greedy_cover(alpha, dirs, thresh))


@dataclass
class DimensionEstimate:
    beta: float
    fit_window: tuple
    residual: float
    scales: np.ndarray = field(default=None, repr=False)
    counts: np.ndarray = field(default=None, repr=False)
    per_gamma: list = field(default=None, repr=False)


def _fit_slope(scales, counts):
    x = np.log(1.0 / scales)
    y = np.log(counts)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def _dimension_of_dirs(dirs, min_scales: int = 6) -> DimensionEstimate:
    if len(dirs) < 2:
        return DimensionEstimate(0.0, (np.nan, np.nan), 0.0, np.array([]), np.array([]))
    gaps = nn_visual_gaps(dirs)
    res = float(np.max(gaps))
    diam = visual_diameter(dirs)
    lo, hi = 2.0 * res, diam / 4.0
    if hi < 4.0 * lo:
        if len(dirs) < 8:
            # a genuinely finite set: count below its smallest separation
            sep = float(np.min(gaps))
            lo, hi = sep / 64.0, sep / 2.0
        else:
            raise InsufficientScales(f"window [{lo:.3g}, {hi:.3g}] spans fewer than two octaves")
    k = max(min_scales, int(np.ceil(2 * np.log2(hi / lo))) + 1)
    scales = np.geomspace(lo, hi, k)
    counts = np.array([_cover_count(dirs, e) for e in scales], dtype=float)
    slope, resid = _fit_slope(scales, counts)
    return DimensionEstimate(max(slope, 0.0), (lo, hi), resid, scales, counts)


def box_dimension(S: BoundarySet, base=None) -> DimensionEstimate:
    """Least-squares slope of log N(S, eps) against log(1/eps)."""
    return _dimension_of_dirs(directions_at(S.points, base))


def invariant_dimension(S: BoundarySet, rng, trials: int = 10, t_max: float = 3.0,
                        include_identity: bool = True) -> DimensionEstimate:
    """Largest fitted slope over randomly moved copies of S.

    Trial 0 is the identity; trial ``i`` uses an isometry drawn from the child
    stream ``i`` with translation length uniform in ``[0, t_max]``, so results
    for a seed prefix never change when ``trials`` grows.
    """
    if trials < 10:
        raise ValueError("invariant_dimension needs at least 10 trials")
    rng = as_stream(rng)
    rows = []
    best = None
    for i in range(trials):
        if i == 0 and include_identity:
            g = Isometry.identity(S.n)
            t = 0.0
        else:
            sub = rng.child(i)
            t = float(sub.gen.uniform(0.0, t_max))
            g = random_far_isometry(sub, t, S.n)
        dirs = directions_at(g.apply_ideal(S.points))
        try:
            est = _dimension_of_dirs(dirs)
        except InsufficientScales:
            rows.append({"trial": i, "t": t, "slope": float("nan")})
            continue
        rows.append({"trial": i, "t": t, "slope": est.beta})
        if best is None or est.beta > best.beta:
            best = est
    if best is None:
        raise InsufficientScales("no trial had a usable scale window")
    return DimensionEstimate(best.beta, best.fit_window, best.residual, best.scales,
                             best.counts, rows)
