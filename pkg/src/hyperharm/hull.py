"""Union-of-geodesics hull of a boundary sample, its nearest-point retraction and probes."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .boundary import BoundarySet, directions_at
from .fitting import decay_fit
from .geometry import (GeodesicLine, GeometryError, SpaceConfig, boost_to, distance,
                       exp_map, mink_inner, mink_norm,
                       sample_annulus_uniform, tangent_frame, ball_volume)
from .streams import as_stream


class ResamplingExhausted(RuntimeError):
    pass


@dataclass
class GeodesicHull:
    """Lines joining pairs ``(I[k], J[k])`` of the endpoint sample ``ends``."""

    ends: np.ndarray = field(repr=False)
    I: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)
    pair_policy: str
    pad: float = 0.0

    def __post_init__(self):
        self.ends = np.asarray(self.ends, dtype=float)
        self.I = np.asarray(self.I, dtype=np.int64)
        self.J = np.asarray(self.J, dtype=np.int64)
        if len(self.I) == 0:
            raise GeometryError("hull has no lines")
        if np.any(self.I == self.J):
            raise GeometryError("a line needs two distinct endpoints")
        key = np.minimum(self.I, self.J) * len(self.ends) + np.maximum(self.I, self.J)
        if len(np.unique(key)) != len(key):
            raise GeometryError("hull lines must be distinct")
        pq = -mink_inner(self.ends[self.I], self.ends[self.J])
        self.C = 2.0 / pq
        self._scale = np.sqrt(2.0 * pq)

    @property
    def n(self) -> int:
        return self.ends.shape[1] - 1

    def __len__(self):
        return len(self.I)

    @property
    def lines(self) -> list[GeodesicLine]:
        return [GeodesicLine(self.ends[i], self.ends[j]) for i, j in zip(self.I, self.J)]

    def line_frames(self, idx=None):
        """Point nearest the model origin and unit tangent of each line."""
        idx = np.arange(len(self)) if idx is None else np.asarray(idx)
        p, q = self.ends[self.I[idx]], self.ends[self.J[idx]]
        sc = self._scale[idx][:, None]
        return (p + q) / sc, (p - q) / sc

    def subset(self, keep) -> "GeodesicHull":
        keep = np.asarray(keep)
        return GeodesicHull(self.ends, self.I[keep], self.J[keep], self.pair_policy + "|subset",
                            self.pad)


def build_hull(S: BoundarySet, pair_policy: str = "auto", budget: int = 4096,
               rng=None, diameter_share: float = 0.25) -> GeodesicHull:
    """All endpoint pairs when they fit in ``budget``, else a stratified sample.

    The ``chain`` policy is for points listed in order along a closed curve:
    point i is joined to i + 2^k (mod m) for every k, which keeps the lines
    dense next to the curve at a cost of m log2 m lines.  The stratified policy spends ``diameter_share`` of the budget on
    near-diameter pairs (each drawn point joined to its most nearly antipodal
    partner as seen from the origin) and the rest on uniform random pairs.
    """
    m = len(S)
    if m < 2:
        raise GeometryError("a hull needs at least two boundary points")
    total = m * (m - 1) // 2
    if pair_policy == "all" or (pair_policy == "auto" and total <= budget):
        I, J = np.triu_indices(m, k=1)
        return GeodesicHull(S.points, I, J, "all")
    if pair_policy == "chain":
        steps = 2 ** np.arange(int(np.log2(max(m // 2, 1))) + 1)
        I = np.repeat(np.arange(m), len(steps))
        J = (I + np.tile(steps, m)) % m
        keep = I != J
        I, J = np.minimum(I, J)[keep], np.maximum(I, J)[keep]
        key = np.unique(I * m + J)
        return GeodesicHull(S.points, key // m, key % m, "chain")
    if pair_policy not in ("auto", "stratified"):
        raise ValueError(f"unknown pair policy {pair_policy!r}")
    g = as_stream(rng).gen
    dirs = directions_at(S.points)
    tree = cKDTree(dirs)
    n_diam = int(round(diameter_share * budget))
    picks = g.permutation(m)[:min(n_diam, m)]
    _, anti = tree.query(-dirs[picks], k=2)
    partner = np.where(anti[:, 0] == picks, anti[:, 1], anti[:, 0])
    keys = set()
    pairs = []

    def add(i, j):
        if i == j:
            return
        k = (min(i, j), max(i, j))
        if k not in keys:
            keys.add(k)
            pairs.append(k)

    for i, j in zip(picks.tolist(), partner.tolist()):
        add(i, j)
    tries = 0
    while len(pairs) < budget and tries < 50 * budget:
        i, j = g.integers(0, m, size=2).tolist()
        add(i, j)
        tries += 1
    P = np.asarray(pairs, dtype=np.int64)
    return GeodesicHull(S.points, P[:, 0], P[:, 1], f"stratified:{diameter_share:g}")


def hull_of_lines(ends, pairs, policy: str = "explicit") -> GeodesicHull:
    P = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return GeodesicHull(np.asarray(ends, dtype=float), P[:, 0], P[:, 1], policy)


def _nearest_line(P, K: GeodesicHull, chunk: int = 4096):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    best = np.empty(len(P))
    arg = np.empty(len(P), dtype=np.int64)
    J = np.diag(np.r_[-1.0, np.ones(K.n)])
    for s in range(0, len(P), chunk):
        alpha = -(P[s:s + chunk] @ J @ K.ends.T)
        best[s:s + chunk], arg[s:s + chunk] = _backend.min_line_product(alpha, K.I, K.J, K.C)
    return best, arg


def _feet(P, K: GeodesicHull, lines):
    p, q = K.ends[K.I[lines]], K.ends[K.J[lines]]
    al = -mink_inner(P, p)
    be = -mink_inner(P, q)
    es = np.sqrt(be / al)
    F = (es[:, None] * p + q / es[:, None]) / K._scale[lines][:, None]
    # restore <F, F> = -1 through the time component, which loses the least far out
    F[:, 0] = np.sqrt(1.0 + np.sum(F[:, 1:] ** 2, axis=1))
    return F


def dist_to_hull(p, K: GeodesicHull, a: float = 1.0, return_line: bool = False):
    """Distance to the nearest line and the foot on it (smallest index on ties)."""
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    P = np.atleast_2d(p)
    c2, arg = _nearest_line(P, K)
    d = np.arccosh(np.sqrt(np.maximum(c2, 1.0))) / a
    feet = _feet(P, K, arg)
    if single:
        out = (float(d[0]), feet[0], int(arg[0]))
    else:
        out = (d, feet, arg)
    return out if return_line else out[:2]


def retract(p, K: GeodesicHull) -> np.ndarray:
    return dist_to_hull(p, K)[1]


def measure_pad(S: BoundarySet, K: GeodesicHull, rng, samples: int = 2000, a: float = 1.0) -> float:
    """Largest hull distance seen among random points of the true convex hull.

    Points are Klein-model convex combinations of ``n`` random sample points,
    which lie in the convex hull of S.
    """
    g = as_stream(rng).gen
    k = S.n
    idx = g.integers(0, len(S), size=(samples, k))
    w = g.dirichlet(np.ones(k), size=samples)
    klein = np.einsum("sk,skd->sd", w, S.points[idx][:, :, 1:])
    r2 = np.sum(klein**2, axis=1)
    ok = r2 < 1 - 1e-12
    X = np.concatenate([np.ones((ok.sum(), 1)), klein[ok]], axis=1) / np.sqrt(1 - r2[ok])[:, None]
    return float(np.max(dist_to_hull(X, K, a)[0])) if len(X) else 0.0


def _csv(rows, header):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(f"{v:.10g}" for v in r) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Lipschitz decay of the retraction


@dataclass
class LipschitzProfile:
    shells: np.ndarray
    ratios: np.ndarray
    slope: float
    slope_stderr: float
    accepted: np.ndarray = field(default=None, repr=False)
    rejected_branch: np.ndarray = field(default=None, repr=False)
    rejected_path: np.ndarray = field(default=None, repr=False)

    def to_csv(self) -> str:
        return _csv([(s, r, float("nan")) for s, r in zip(self.shells, self.ratios)],
                    ["shell", "estimate", "stderr"])


def _random_unit_tangents(g, base):
    """Uniformly distributed unit tangent vectors (coefficients in an orthonormal frame)."""
    E = tangent_frame(base)
    c = g.standard_normal(base.shape[:-1] + (E.shape[-2],))
    c /= np.linalg.norm(c, axis=-1, keepdims=True)
    return np.einsum("...k,...kd->...d", c, E)


def _random_normals(g, base, tangent):
    """Uniform random unit vectors at ``base`` orthogonal to the unit ``tangent``."""
    v = _random_unit_tangents(g, base)
    v = v - mink_inner(v, tangent)[:, None] * tangent
    return v / mink_norm(v)[:, None]


def _shell_pairs(K, g, s, width, count, pair_gap, a, along, audit_points, max_batches):
    ratios = []
    rej_branch = rej_path = 0
    batch = max(64, 2 * count)
    for _ in range(max_batches):
        lines = g.integers(0, len(K), size=batch)
        base, u = K.line_frames(lines)
        tpar = a * g.uniform(-along, along, size=batch)
        foot = np.cosh(tpar)[:, None] * base + np.sinh(tpar)[:, None] * u
        utan = np.sinh(tpar)[:, None] * base + np.cosh(tpar)[:, None] * u
        nrm = _random_normals(g, foot, utan)
        h = a * g.uniform(s, s + width, size=batch)
        X = exp_map(foot, h[:, None] * nrm)
        V = _random_unit_tangents(g, X)
        Y = exp_map(X, (a * pair_gap) * V)
        dX, fX, lX = dist_to_hull(X, K, a, return_line=True)
        dY, fY, lY = dist_to_hull(Y, K, a, return_line=True)
        ok = (dX >= s) & (dX <= s + width) & (dY >= s)
        for frac in np.linspace(0, 1, audit_points + 2)[1:-1]:
            Z = exp_map(X, (frac * a * pair_gap) * V)
            ok &= dist_to_hull(Z, K, a)[0] >= s
        rej_path += int(np.sum(~ok))
        same = lX == lY
        rej_branch += int(np.sum(ok & ~same))
        ok &= same
        if np.any(ok):
            r = distance(fX[ok], fY[ok], a) / distance(X[ok], Y[ok], a)
            ratios.extend(r.tolist())
        if len(ratios) >= count:
            return np.asarray(ratios[:count]), rej_branch, rej_path
    raise ResamplingExhausted(f"shell s={s:g}: only {len(ratios)} of {count} admissible pairs")


def lipschitz_profile(K: GeodesicHull, rng, shells=(1, 2, 3, 4, 5), pairs_per_shell: int = 200,
                      pair_gap: float = 0.05, a: float = 1.0, width: float = 0.5,
                      along: float = 1.5, audit_points: int = 3,
                      max_batches: int = 200) -> LipschitzProfile:
    """Largest observed ``dist(r x, r y) / dist(x, y)`` on each hull-distance shell.

    Pairs are admissible when both points and ``audit_points`` interior
    points of the segment [x, y] stay at hull distance at least ``s``, and
    when x and y retract onto the same line.  The second condition removes
    pairs that straddle the seam where the nearest line switches, across
    which the retraction onto a union of lines is discontinuous.
    """
    g = as_stream(rng).gen
    shells = np.asarray(shells, dtype=float)
    if pair_gap <= 0:
        raise ValueError("pair_gap must be positive")
    ratios = np.empty(len(shells))
    acc = np.empty(len(shells), dtype=np.int64)
    rb = np.empty(len(shells), dtype=np.int64)
    rp = np.empty(len(shells), dtype=np.int64)
    for k, s in enumerate(shells):
        r, rb[k], rp[k] = _shell_pairs(K, g, s, width, pairs_per_shell, pair_gap, a, along,
                                        audit_points, max_batches)
        ratios[k] = r.max()
        acc[k] = len(r)
    if len(shells) >= 2:
        fit = decay_fit(shells, ratios, min_points=2)
        slope, err = -fit.rate, fit.stderr
    else:
        slope, err = float("nan"), float("nan")
    return LipschitzProfile(shells, ratios, slope, err, acc, rb, rp)


# ---------------------------------------------------------------------------
# cone inclusion


def _visual_gap_to_set(x, ideal, S_dirs_at_x):
    """Visual distance, seen from x, from each ideal point to its nearest sample point."""
    T = boost_to(x)
    J = np.diag(np.r_[-1.0, np.ones(len(x) - 1)])
    local = ideal @ (J @ T.T @ J).T
    d = local[:, 1:] / np.linalg.norm(local[:, 1:], axis=1, keepdims=True)
    chord, _ = cKDTree(S_dirs_at_x).query(d)
    theta = 2 * np.arcsin(np.clip(chord / 2, 0, 1))
    return np.tan(theta / 4)


def cone_inclusion_probe(S: BoundarySet, x, R: float, samples: int, rng, C: float = 1.0,
                         a: float = 1.0, K: GeodesicHull | None = None, depth: float = 1.0) -> dict:
    """Largest radial-projection gap to S among points of N_C(Cone(x, S)) outside B(x, R).

    Points are drawn as ``exp_z(c v)`` with ``z`` on a random ray from x to a
    sample point at distance in ``[R, R + depth]``, ``v`` a random unit vector
    and ``c`` uniform in ``[0, C]``.  When a hull is supplied the report also
    carries the largest hull distance of the accepted points.
    """
    if R < 1:
        raise ValueError("cone probe needs R >= 1")
    x = np.asarray(x, dtype=float)
    g = as_stream(rng).gen
    Sd = directions_at(S.points, x)
    pts = []
    got = 0
    while got < samples:
        b = 2 * (samples - got) + 16
        pick = S.points[g.integers(0, len(S), size=b)]
        X = np.broadcast_to(x, pick.shape)
        u = pick + mink_inner(X, pick)[:, None] * X
        u /= mink_norm(u)[:, None]
        t = a * g.uniform(R, R + depth, size=b)
        z = np.cosh(t)[:, None] * X + np.sinh(t)[:, None] * u
        v = _random_unit_tangents(g, z)
        c = a * C * g.random(b)
        y = exp_map(z, c[:, None] * v)
        keep = distance(np.broadcast_to(x, y.shape), y, a) >= R
        pts.append(y[keep])
        got += int(keep.sum())
    Y = np.concatenate(pts)[:samples]
    X = np.broadcast_to(x, Y.shape)
    w = Y + mink_inner(X, Y)[:, None] * X
    w /= mink_norm(w)[:, None]
    ideal = X + w
    gaps = _visual_gap_to_set(x, ideal, Sd)
    out = {"R": float(R), "C": float(C), "samples": int(samples),
           "max_gap": float(gaps.max()), "mean_gap": float(gaps.mean())}
    if K is not None:
        out["max_hull_distance"] = float(np.max(dist_to_hull(Y, K, a)[0]))
    return out


def cone_inclusion_profile(S, x, R_grid, samples, rng, C=1.0, a=1.0, K=None) -> dict:
    rng = as_stream(rng)
    rows = [cone_inclusion_probe(S, x, R, samples, rng.child(f"R{k}"), C, a, K)
            for k, R in enumerate(R_grid)]
    fit = decay_fit([r["R"] for r in rows], [r["max_gap"] for r in rows], min_points=2)
    return {"rows": rows, "slope": -fit.rate, "slope_stderr": fit.stderr}


# ---------------------------------------------------------------------------
# volume growth


@dataclass
class VolumeProfile:
    rho_grid: np.ndarray
    d: float
    counts: np.ndarray
    sizes: np.ndarray
    shell_volume: np.ndarray
    shell_stderr: np.ndarray
    cumulative: np.ndarray
    cumulative_stderr: np.ndarray
    fitted_rate: float
    rate_stderr: float
    flagged: list = field(default_factory=list)

    def to_csv(self) -> str:
        return _csv(zip(self.rho_grid, self.cumulative, self.cumulative_stderr),
                    ["shell", "estimate", "stderr"])


def annulus_volume(cfg: SpaceConfig, r_in, r_out):
    return ball_volume(cfg, r_out) - ball_volume(cfg, r_in)


def _line_normals(b, u, n):
    """Orthonormal vectors spanning the normal space of each line (constant along it).

    Candidates are the coordinate axes projected off span(b, u); at each step
    the candidate with the largest remaining norm is kept.
    """
    rows = np.arange(len(b))
    cands = np.zeros((len(b), n, n + 1))
    for k in range(n):
        cands[:, k, k + 1] = 1.0
    cands = cands + mink_inner(cands, b[:, None])[..., None] * b[:, None] \
        - mink_inner(cands, u[:, None])[..., None] * u[:, None]
    chosen = []
    for _ in range(n - 1):
        for w in chosen:
            cands = cands - mink_inner(cands, w[:, None])[..., None] * w[:, None]
        norms = np.sqrt(np.maximum(mink_inner(cands, cands), 0.0))
        k = np.argmax(norms, axis=1)
        chosen.append(cands[rows, k] / norms[rows, k][:, None])
    return chosen


def tube_samples(K: GeodesicHull, x, r_in: float, r_out: float, d: float, samples: int, rng,
                 a: float = 1.0, chunk: int = 4096, return_points: bool = False):
    """Importance samples of ``N_d(K)`` between radii ``r_in`` and ``r_out`` about x.

    Each line contributes a cylinder of radius d around the stretch of the
    line within ``r_out + d`` of x; these cylinders cover ``N_d(K) & B(x, r_out)``.
    Points are drawn uniformly from the disjoint union of the cylinders and
    weighted by the union's total volume over the number of cylinders
    containing them, so ``mean(weight * f(radius))`` is an unbiased estimate
    of the integral of a radial function ``f`` over the neighborhood.

    Returns ``(radius, weight, hits)``; points outside the annulus carry
    weight 0.  With ``return_points`` the sampled points come fourth.
    """
    g = as_stream(rng).gen
    x = np.asarray(x, dtype=float)
    n = K.n
    R, D = a * r_out, a * d
    p_all, q_all = K.ends[K.I], K.ends[K.J]
    al = -mink_inner(x, p_all)
    be = -mink_inner(x, q_all)
    sx = 0.5 * np.log(be / al)
    chx = np.maximum(np.sqrt(al * be * K.C), 1.0)
    act = np.nonzero(np.arccosh(chx) <= R + D)[0]
    radius = np.zeros(samples)
    weight = np.zeros(samples)
    points = np.tile(x, (samples, 1))

    def done(hits):
        return (radius, weight, hits, points) if return_points else (radius, weight, hits)

    if len(act) == 0 or D <= 0:
        return done(0)
    # no point of B(x, R) is farther than R + dist(x, line) from a line
    Dl = np.minimum(D, R + np.arccosh(chx[act]))
    half = np.arccosh(np.maximum(np.cosh(R + Dl) / chx[act], 1.0))
    cross = np.pi * np.sinh(Dl) ** 2 if n == 3 else 2.0 * np.sinh(Dl)
    V = 2.0 * half * cross
    total = float(V.sum())
    if not total > 0:
        return done(0)
    lo = np.exp(2 * (sx[act] - half))
    hi = np.exp(2 * (sx[act] + half))
    I, J, C = K.I[act], K.J[act], K.C[act]
    thresh = np.cosh(Dl) ** 2
    Jm = np.diag(np.r_[-1.0, np.ones(n)])
    cos_in, cos_out = np.cosh(a * r_in), np.cosh(R)
    hits = 0
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        pick = g.choice(len(act), size=m, p=V / total)
        s = sx[act][pick] + g.uniform(-1.0, 1.0, size=m) * half[pick]
        p, q = K.ends[I[pick]], K.ends[J[pick]]
        sc = K._scale[act][pick][:, None]
        P = (np.exp(s)[:, None] * p + np.exp(-s)[:, None] * q) / sc
        normals = _line_normals(*K.line_frames(act[pick]), n)
        if n == 3:
            r = 0.5 * np.arccosh(1.0 + g.random(m) * (np.cosh(2 * Dl[pick]) - 1.0))
            th = g.uniform(0, 2 * np.pi, size=m)
            off = np.cos(th)[:, None] * normals[0] + np.sin(th)[:, None] * normals[1]
        else:
            r = np.arcsinh(g.uniform(-1.0, 1.0, size=m) * np.sinh(Dl[pick]))
            off = normals[0]
        Y = np.cosh(r)[:, None] * P + np.sinh(r)[:, None] * off
        cx = np.maximum(-mink_inner(Y, x), 1.0)
        inside = (cx >= cos_in) & (cx <= cos_out)
        sl = slice(start, start + m)
        radius[sl] = np.arccosh(cx) / a
        points[sl] = Y
        if np.any(inside):
            alpha = -(Y[inside] @ Jm @ K.ends.T)
            mult = _backend.cylinder_count(alpha, I, J, C, lo, hi, thresh)
            w = np.zeros(m)
            w[inside] = total / np.maximum(mult, 1) / a**n
            weight[sl] = w
            hits += int(inside.sum())
    return done(hits)


def tube_volume_estimate(K: GeodesicHull, x, r_in: float, r_out: float, d: float,
                         samples: int, rng, a: float = 1.0):
    """Volume of ``N_d(K)`` between radii ``r_in`` and ``r_out``: ``(volume, stderr, hits)``."""
    _, w, hits = tube_samples(K, x, r_in, r_out, d, samples, rng, a)
    err = float(w.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return float(w.mean()), err, hits


def volume_profile(K: GeodesicHull, x, d: float, rho_max: float, samples_per_shell: int, rng,
                   a: float = 1.0, fit_from: float = 2.0, method: str = "tube") -> VolumeProfile:
    """Monte Carlo volume of ``N_d(K)`` inside unit annuli about x.

    ``method="tube"`` importance-samples the neighborhood itself (see
    :func:`tube_volume_estimate`); ``"ambient"`` samples the annulus
    uniformly, which runs out of hits once the neighborhood's share of the
    annulus drops below ``1 / samples_per_shell``.  The exponential rate is
    fitted to the per-annulus volumes with outer radius in
    ``[fit_from, rho_max]``.
    """
    if d < 0 or rho_max < 2:
        raise ValueError("need d >= 0 and rho_max >= 2")
    if method not in ("tube", "ambient"):
        raise ValueError(f"unknown method {method!r}")
    rng = as_stream(rng)
    cfg = SpaceConfig(K.n, a)
    outer = np.arange(1, int(np.ceil(rho_max)) + 1, dtype=float)
    counts = np.zeros(len(outer), dtype=np.int64)
    vol = np.zeros(len(outer))
    err = np.zeros(len(outer))
    for k, ro in enumerate(outer):
        sub = rng.child(f"annulus{k}")
        if method == "tube":
            vol[k], err[k], counts[k] = tube_volume_estimate(K, x, ro - 1, ro, d,
                                                             samples_per_shell, sub, a)
            continue
        pts, _ = sample_annulus_uniform(sub, x, ro - 1, ro, samples_per_shell, cfg)
        hit = dist_to_hull(pts, K, a)[0] <= d
        counts[k] = int(hit.sum())
        f = counts[k] / samples_per_shell
        av = annulus_volume(cfg, ro - 1, ro)
        vol[k] = av * f
        err[k] = av * np.sqrt(max(f * (1 - f), 1.0 / samples_per_shell) / samples_per_shell)
    cum = np.cumsum(vol)
    cum_err = np.sqrt(np.cumsum(err**2))
    sel = (outer >= fit_from) & (outer <= rho_max + 1e-12)
    flagged = [float(r) for r in outer[sel & (counts == 0)]]
    use = sel & (counts > 0) & (vol > 0)
    if use.sum() >= 2:
        fit = decay_fit(outer[use], vol[use], err[use], min_points=2)
        rate, rate_err = -fit.rate, fit.stderr
    else:
        rate, rate_err = float("nan"), float("nan")
    return VolumeProfile(outer, d, counts, np.full(len(outer), samples_per_shell), vol, err,
                         cum, cum_err, rate, rate_err, flagged)
