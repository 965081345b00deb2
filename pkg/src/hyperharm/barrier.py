"""Bounded subharmonic barriers built from the distance to a hull.

The barrier is ``Phi = sum_n e^{-a n} phi_n - W`` where ``phi_n`` is a
profile of the distance ``delta`` to the hull that is strictly subharmonic
on the shell ``n <= delta <= n + 1``, and ``W`` is the Green potential of a
cutoff ``chi`` supported near the hull, so that ``-Delta W = chi``.

``W`` is evaluated by splitting the domain with a cutoff ``psi`` centred at
a chosen point c.  Inside ``B(c, 2)`` a fixed polar quadrature about the
evaluation point is used; this part is a smooth function of the evaluation
point, so finite differences of it recover ``-chi psi``.  The rest is
importance sampled along the hull with samples that depend only on c, which
makes it harmonic (to finite-difference accuracy) near c.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .geometry import (GeometryError, SpaceConfig, fd_gradient_norm, fd_laplacian,
                       mink_inner, tangent_frame, unit_distance)
from .heat import green_shell_integral, greens_closed_form, log_greens
from .hull import GeodesicHull, _csv, dist_to_hull, tube_samples
from .streams import as_stream


class ProfileAuditError(AssertionError):
    """The bump profile failed one of its own invariants."""


class GreenHypothesisError(ValueError):
    """The Green potential of the hull neighborhood is not bounded."""


def _smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


# ---------------------------------------------------------------------------
# distance field


def delta_field(r, a: float = 1.0) -> Callable:
    """The field ``x -> dist(x, r(x))``.

    ``r`` is a hull (the raw nearest-point retraction, for which the field is
    just ``dist_to_hull``) or any callable mapping points to points.
    """
    if isinstance(r, GeodesicHull):
        K = r

        def delta(Z):
            return np.atleast_1d(dist_to_hull(np.atleast_2d(Z), K, a)[0])
        return delta

    def delta(Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return np.maximum(unit_distance(Z, np.atleast_2d(r(Z))), 0.0) / a
    return delta


def geodesic_distance_laplacian(cfg: SpaceConfig, delta):
    """Laplacian of the distance to a single geodesic.

    In H^2 it is ``a tanh(a delta)``; in H^3 the circle of directions around
    the line adds ``a coth(a delta)``.
    """
    x = cfg.a * np.asarray(delta, dtype=float)
    lap = cfg.a * np.tanh(x)
    if cfg.n == 3:
        lap = lap + cfg.a / np.tanh(x)
    return lap


@dataclass
class DeltaReport:
    dist: np.ndarray
    laplacian: np.ndarray
    gradient: np.ndarray

    @property
    def min_laplacian(self) -> float:
        return float(np.min(self.laplacian))

    @property
    def max_gradient(self) -> float:
        return float(np.max(self.gradient))

    def to_csv(self) -> str:
        return _csv(zip(self.dist, self.laplacian, self.gradient),
                    ["dist_to_hull", "laplacian", "gradient"])


def delta_probe(delta, K: GeodesicHull, probes, h: float = 0.02, a: float = 1.0,
                min_dist: float = 2.0) -> DeltaReport:
    """Finite-difference Laplacian and gradient norm of ``delta`` at probes far from K."""
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    dist = np.atleast_1d(dist_to_hull(P, K, a)[0])
    if np.any(dist < min_dist):
        raise GeometryError(f"probes must lie at hull distance >= {min_dist}")
    lap = np.atleast_1d(fd_laplacian(delta, P, h, a))
    grad = np.atleast_1d(fd_gradient_norm(delta, P, h, a))
    return DeltaReport(dist, lap, grad)


# ---------------------------------------------------------------------------
# the profile u


@dataclass(frozen=True)
class BumpProfile:
    """C^1 profile: smoothstep ramp on [-1/2, 0], 1 on [0, 1 + sigma], then decay.

    On ``[1 + sigma, 2 + sigma]`` a cubic Hermite blend leaves the plateau with
    zero slope and meets ``exp(-eps (x - 1 - sigma))`` with matching value and
    slope; the exponential continues from there.
    """

    eps: float
    A: float
    B: float
    sigma: float = 1.0

    @property
    def knots(self) -> tuple:
        s = self.sigma
        return (-0.5, 0.0, 1.0 + s, 2.0 + s)

    def _pieces(self):
        eps, s = self.eps, self.sigma
        q = math.exp(-eps)
        m1 = -eps * q

        def ramp(x):
            t = 2.0 * (x + 0.5)
            return 3 * t**2 - 2 * t**3, 2.0 * (6 * t - 6 * t**2)

        def blend(x):
            t = x - 1.0 - s
            v = (2 * t**3 - 3 * t**2 + 1) + q * (-2 * t**3 + 3 * t**2) + m1 * (t**3 - t**2)
            dv = (6 * t**2 - 6 * t) + q * (-6 * t**2 + 6 * t) + m1 * (3 * t**2 - 2 * t)
            return v, dv

        def tail(x):
            v = np.exp(-eps * (x - 1.0 - s))
            return v, -eps * v

        zero = lambda x: (0.0 * x, 0.0 * x)  # noqa: E731
        one = lambda x: (1.0 + 0.0 * x, 0.0 * x)  # noqa: E731
        return [zero, ramp, one, blend, tail]

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.knots), x, side="right")
        v = np.zeros_like(x)
        dv = np.zeros_like(x)
        for k, piece in enumerate(self._pieces()):
            sel = idx == k
            if np.any(sel):
                v[sel], dv[sel] = piece(x[sel])
        return v, dv

    def u(self, x):
        return self._eval(x)[0]

    def du(self, x):
        return self._eval(x)[1]

    def antiderivative(self, x):
        """``F(x)`` = integral of u from -infinity to x, in closed form."""
        eps, s = self.eps, self.sigma
        q = math.exp(-eps)
        x = np.asarray(x, dtype=float)
        t = np.clip(2.0 * (x + 0.5), 0.0, 1.0)
        F = 0.5 * (t**3 - 0.5 * t**4)
        F = F + np.clip(x, 0.0, 1.0 + s)
        b = np.clip(x - 1.0 - s, 0.0, 1.0)
        F = F + (b**4 / 2 - b**3 + b) + q * (-b**4 / 2 + b**3) - eps * q * (b**4 / 4 - b**3 / 3)
        e = np.maximum(x - 2.0 - s, 0.0)
        F = F + q * (-np.expm1(-eps * e)) / eps
        return F

    @property
    def total(self) -> float:
        q = math.exp(-self.eps)
        return 0.25 + 1.0 + self.sigma + 0.5 * (1 + q) + self.eps * q / 12 + q / self.eps

    def audit(self, points: int = 10_000, tol: float = 1e-12) -> dict:
        """Check every invariant of the profile on a grid; returns the measured margins."""
        eps, s = self.eps, self.sigma
        pieces = self._pieces()
        jumps = []
        for k, x0 in enumerate(self.knots):
            lv, ld = pieces[k](np.array([x0]))
            rv, rd = pieces[k + 1](np.array([x0]))
            jumps.append(max(abs(float(lv[0] - rv[0])), abs(float(ld[0] - rd[0]))))
        hi = 2.0 + s + 20.0 / eps
        x = np.linspace(-1.0, hi, points)
        v, dv = self._eval(x)
        left = x <= -0.5
        flat = (x >= 0) & (x <= 1)
        rise = x <= 1
        fall = x >= 1 + s
        dx = np.diff(v)
        ineq = self.A * v + self.B * np.minimum(dv, 0.0)
        tail = x >= 2.0
        ratio = v[tail] * np.exp(eps * x[tail])
        out = {
            "c1_jump": max(jumps),
            "zero_left": float(np.max(np.abs(v[left]))),
            "one_plateau": float(np.max(np.abs(v[flat] - 1.0))),
            "rise_min_step": float(np.min(dx[rise[1:] & rise[:-1]])),
            "fall_max_step": float(np.max(dx[fall[1:] & fall[:-1]])),
            "inequality_min": float(np.min(ineq)),
            "tail_ratio_min": float(np.min(ratio)),
            "tail_ratio_max": float(np.max(ratio)),
        }
        out["ok"] = bool(out["c1_jump"] <= tol and out["zero_left"] <= tol
                         and out["one_plateau"] <= tol and out["rise_min_step"] >= -tol
                         and out["fall_max_step"] < 0 and out["inequality_min"] >= -tol
                         and out["tail_ratio_min"] > 0 and np.isfinite(out["tail_ratio_max"]))
        return out

    def to_dict(self):
        return {"eps": self.eps, "A": self.A, "B": self.B, "sigma": self.sigma}


def bump_profile(A: float, B: float, a: float = 1.0, sigma: float = 1.0) -> BumpProfile:
    """Profile with decay rate ``eps = min(A / B, a) / 2``, audited before it is returned."""
    if not (A > 0 and B > 0):
        raise ValueError("A and B must be positive")
    prof = BumpProfile(min(A / B, a) / 2.0, float(A), float(B), float(sigma))
    report = prof.audit()
    if not report["ok"]:
        raise ProfileAuditError(f"bump profile failed its audit: {report}")
    return prof


# ---------------------------------------------------------------------------
# shell functions


@dataclass
class ShellFunction:
    """``phi_d = F(delta - d) / A``: subharmonic everywhere, ``Delta >= 1`` on the d-shell."""

    profile: BumpProfile
    delta: Callable = field(repr=False)
    d: float
    scale: float
    sup: float

    def __call__(self, Z):
        return self.scale * self.profile.antiderivative(self.delta(Z) - self.d)


def _profile_integral(prof: BumpProfile, lo: float) -> float:
    """Numerical integral of u over ``[lo, infinity)`` split at the knots."""
    cuts = [lo] + [k for k in prof.knots if k > lo]
    total = 0.0
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        total += integrate.quad(lambda t: float(prof.u(t)), x0, x1, epsabs=1e-13, epsrel=1e-12)[0]
    end = cuts[-1]
    total += integrate.quad(lambda t: float(prof.u(t)), end, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    return total


def phi_shell(profile: BumpProfile, delta: Callable, d: float, C: float = 2.0) -> ShellFunction:
    """The shell function of depth d.

    With ``f(x)`` the integral of ``u(t - d)`` from 0 to x, ``f(delta)`` equals
    ``F(delta - d)`` once ``d >= 1/2``.  Dividing by A (a lower bound for the
    Laplacian of delta) gives ``Delta phi_d >= 1`` on the shell.  The reported
    supremum is the numerically integrated limit of ``f`` at infinity.
    """
    if d < C:
        raise GeometryError(f"shell depth {d} is below the validity radius {C}")
    scale = 1.0 / profile.A
    return ShellFunction(profile, delta, float(d), scale, scale * _profile_integral(profile, -d))


# ---------------------------------------------------------------------------
# Green potential


@dataclass
class GreenSpec:
    """Radial Green's function, its log, and the sampling budget of the far part."""

    green: Callable
    log_green: Callable
    samples: int = 1000
    seed: int = 0
    label: str = "closed-form"

    @classmethod
    def closed_form(cls, cfg: SpaceConfig, samples: int = 1000, seed: int = 0) -> "GreenSpec":
        return cls(lambda r: greens_closed_form(cfg, r), lambda r: log_greens(cfg, r),
                   samples, seed)

    @classmethod
    def constant(cls, value: float = 1.0, samples: int = 500, seed: int = 0) -> "GreenSpec":
        """A deliberately non-integrable kernel, for exercising the refusal path."""
        return cls(lambda r: np.full(np.shape(r), value), lambda r: math.log(value),
                   samples, seed, "constant")


def _polar_rule(n: int, radius: float, n_rho: int, n_ang: int):
    """Unit directions and weights of a product rule on ``B(0, radius)`` in normal coordinates.

    Radii use Gauss-Legendre in ``s`` with ``rho = radius s^2``, which tames the
    kernel's behaviour at 0.
    """
    s, ws = np.polynomial.legendre.leggauss(n_rho)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    rho = radius * s**2
    wr = ws * 2.0 * radius * s
    if n == 2:
        th = 2 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        wd = np.full(n_ang, 2 * np.pi / n_ang)
    else:
        z, wz = np.polynomial.legendre.leggauss(n_ang // 2)
        ph = 2 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
        Z, P = np.meshgrid(z, ph, indexing="ij")
        R = np.sqrt(1 - Z**2)
        dirs = np.stack([R * np.cos(P), R * np.sin(P), Z], axis=-1).reshape(-1, 3)
        wd = (wz[:, None] * np.full(n_ang, 2 * np.pi / n_ang)[None, :]).reshape(-1)
    return rho, wr, dirs, wd


def _key_of(c) -> str:
    return np.round(np.asarray(c, dtype=float), 10).tobytes().hex()


@dataclass
class PhiAssembly:
    """Evaluator of ``Phi = sum_{n >= ceil C} e^{-a n} phi_n - integral chi G``."""

    cfg: SpaceConfig
    K: GeodesicHull = field(repr=False)
    profile: BumpProfile
    C: float
    shells: list = field(repr=False)
    coefficients: np.ndarray
    series_tail: float
    green: GreenSpec = field(repr=False)
    psi_radius: float = 2.0
    quad_rho: int = 64
    quad_angles: int | None = None
    tail_tol: float = 1e-5
    max_annuli: int = 60
    sup_bound: float = float("nan")
    green_stderr: float = float("nan")
    _rule: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.delta = delta_field(self.K, self.cfg.a)
        if self.quad_angles is None:
            # 512 directions on the sphere already resolve the C^2 integrand in H^3
            self.quad_angles = 128 if self.cfg.n == 2 else 32
        self._rule = _polar_rule(self.cfg.n, self.psi_radius, self.quad_rho, self.quad_angles)
        self._rng = as_stream(self.green.seed).child("phi-far")

    # -- pieces -----------------------------------------------------------
    def chi(self, Z):
        """1 on ``N_{C+1}(K)``, 0 outside ``N_{C+2}(K)``, C^2 in between."""
        return 1.0 - _smoothstep5(self.delta(Z) - self.C - 1.0)

    def _psi(self, rho):
        return 1.0 - _smoothstep5(2.0 * rho / self.psi_radius - 1.0)

    def series(self, Z):
        dl = self.delta(Z)
        out = np.zeros_like(dl)
        for c, sh in zip(self.coefficients, self.shells):
            out += c * sh.scale * self.profile.antiderivative(dl - sh.d)
        return out

    def _near(self, Z, c):
        """Quadrature of ``chi psi_c G(z, .)`` in polar coordinates about each z."""
        a = self.cfg.a
        rho, wr, dirs, wd = self._rule
        reach = self.psi_radius + float(np.max(unit_distance(Z, c[None]))) / a
        if float(self.delta(c[None])[0]) > self.C + 2.0 + reach:
            return np.zeros(len(Z))
        n = self.cfg.n
        jac = (np.sinh(a * rho) / a) ** (n - 1)
        # the kernel weight vanishes at rho = 0 since rho = radius s^2 > 0 at every node
        wrad = wr * self.green.green(rho) * jac
        out = np.zeros(len(Z))
        for i, z in enumerate(Z):
            # chi only sees lines within C + 2 of the quadrature ball around z
            chl = np.sqrt(-mink_inner(z, self.K.ends[self.K.I]) * -mink_inner(z, self.K.ends[self.K.J])
                          * self.K.C)
            keep = np.nonzero(np.arccosh(np.maximum(chl, 1.0)) <= a * (self.C + 2.0 + self.psi_radius)
                              + 1e-9)[0]
            if len(keep) == 0:
                continue
            Ks = self.K.subset(keep)
            V = dirs @ tangent_frame(z)
            Y = (np.cosh(a * rho)[:, None, None] * z[None, None, :]
                 + np.sinh(a * rho)[:, None, None] * V[None, :, :]).reshape(-1, n + 1)
            rc = unit_distance(Y, c[None]) / a
            chi = 1.0 - _smoothstep5(dist_to_hull(Y, Ks, a)[0] - self.C - 1.0)
            f = (chi * self._psi(rc)).reshape(len(rho), len(dirs))
            out[i] = wrad @ f @ wd
        return out

    def _far(self, Z, c):
        """Importance-sampled ``chi (1 - psi_c) G(z, .)`` over annuli about c."""
        a, n = self.cfg.a, self.cfg.n
        rng = self._rng.child(_key_of(c))
        d = self.C + 2.0
        total = np.zeros(len(Z))
        var0 = 0.0
        vols = []
        # annuli closer than the neighborhood itself are empty
        gap = float(self.delta(c[None])[0]) - d
        k = max(int(math.floor(self.psi_radius / 2)), int(math.floor(gap)))
        while k < self.max_annuli:
            r, w, _, Y = tube_samples(self.K, c, float(k), float(k + 1), d, self.green.samples,
                                      rng.child(f"annulus{k}"), a, return_points=True)
            vols.append(float(w.mean()))
            live = w > 0
            if np.any(live):
                Yl = Y[live]
                base = w[live] * self.chi(Yl) * (1.0 - self._psi(r[live]))
                rz = np.maximum(unit_distance(Yl[None, :, :], Z[:, None, :]) / a, 1e-12)
                vals = base[None, :] * self.green.green(rz)
                total += vals.sum(axis=1) / len(w)
                z0 = np.zeros(len(w))
                z0[live] = vals[0]
                var0 += float(z0.var(ddof=1) / len(w))
            k += 1
            vv = np.asarray(vols)
            pos = np.nonzero(vv > 0)[0][-4:]
            if len(pos) < 4:
                continue
            # extrapolate the last annulus volumes with their recent growth rate
            slope = np.polyfit(pos.astype(float), np.log(vv[pos]), 1)[0]
            rate = min(max(slope, 0.0) + 0.1, (n - 1) * a)
            ks = np.arange(k, k + 400)
            logs = np.array([self.green.log_green(max(j - 1.0, 0.5)) for j in ks]) \
                + math.log(vv[-1] if vv[-1] > 0 else vv[pos[-1]]) + rate * (ks - k + 1)
            if logs[-1] > np.max(logs) + math.log(1e-3):
                continue
            top = float(np.max(logs))
            tail = math.exp(min(top, 700.0)) * float(np.sum(np.exp(logs - top)))
            if tail <= self.tail_tol * max(float(np.max(np.abs(total))), 1e-12):
                break
        else:
            raise GreenHypothesisError("Green potential tail does not decay within the annulus cap")
        return total, math.sqrt(var0)

    def green_term(self, Z, center=None):
        """``(values, stderr)`` of the Green potential at Z.

        With ``center`` given, the near/far split is taken about it for all
        of Z (as finite differences require); otherwise each point is its
        own center.
        """
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if center is not None:
            c = np.asarray(center, dtype=float)
            far, err = self._far(Z, c)
            return self._near(Z, c) + far, np.full(len(Z), err)
        vals = np.empty(len(Z))
        errs = np.empty(len(Z))
        for i, z in enumerate(Z):
            v, e = self.green_term(z[None], center=z)
            vals[i], errs[i] = v[0], e[0]
        return vals, errs

    # -- Phi ---------------------------------------------------------------
    def __call__(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return self.series(Z) - self.green_term(Z)[0]

    def centered(self, c) -> Callable:
        """Phi with the Green split fixed at c, for derivatives near c."""
        c = np.asarray(c, dtype=float)

        def phi(Z):
            Z = np.atleast_2d(np.asarray(Z, dtype=float))
            return self.series(Z) - self.green_term(Z, center=c)[0]
        return phi

    def measure_sup(self, probes) -> float:
        """Largest ``|Phi|`` over the probes; also records the largest Green stderr."""
        P = np.atleast_2d(np.asarray(probes, dtype=float))
        g, err = self.green_term(P)
        vals = self.series(P) - g
        self.sup_bound = float(np.max(np.abs(vals)))
        self.green_stderr = float(np.max(err))
        return self.sup_bound

    def to_json(self) -> str:
        return json.dumps({
            "n": self.cfg.n, "a": self.cfg.a, "C": self.C, "profile": self.profile.to_dict(),
            "shell_depths": [sh.d for sh in self.shells],
            "coefficients": list(map(float, self.coefficients)),
            "series_tail": self.series_tail, "green": self.green.label,
            "green_samples": self.green.samples, "seed": self.green.seed,
            "psi_radius": self.psi_radius, "quad_rho": self.quad_rho,
            "quad_angles": self.quad_angles, "sup_bound": self.sup_bound,
            "green_stderr": self.green_stderr}, sort_keys=True)


def assemble_phi(cfg: SpaceConfig, K: GeodesicHull, profile: BumpProfile, green: GreenSpec,
                 C: float = 2.0, reference=None, check_samples: int = 2000,
                 rel_tail: float = 1e-6, **kw) -> PhiAssembly:
    """Assemble the barrier after checking that the Green potential of ``N_{C+2}(K)`` is finite.

    The check integrates the supplied kernel over the neighborhood around a
    reference point on the hull; a tail that does not decay means the
    potential is unbounded and the construction is refused.
    """
    a = cfg.a
    if reference is None:
        o = np.zeros(K.n + 1)
        o[0] = 1.0
        reference = dist_to_hull(o, K, a)[1]
    _, _, flagged = green_shell_integral(cfg, K, reference, C + 2.0,
                                         as_stream(green.seed).child("hypothesis"), check_samples,
                                         green=green.green, log_green=green.log_green)
    if flagged:
        raise GreenHypothesisError(
            f"the {green.label} kernel has no finite integral over N_(C+2)(K)")
    delta = delta_field(K, a)
    n0 = int(math.ceil(C))
    # sum_{n > N} e^{-a n} <= e^{-a (N+1)} / (1 - e^{-a}) must drop below rel_tail e^{-a n0}
    N = n0
    while math.exp(-a * (N + 1)) / -math.expm1(-a) >= rel_tail * math.exp(-a * n0):
        N += 1
    shells = [phi_shell(profile, delta, float(n), C) for n in range(n0, N + 1)]
    coef = np.exp(-a * np.arange(n0, N + 1))
    tail = math.exp(-a * (N + 1)) / -math.expm1(-a) * shells[0].sup
    return PhiAssembly(cfg, K, profile, float(C), shells, coef, tail, green, **kw)


# ---------------------------------------------------------------------------
# probing


@dataclass
class SubharmonicityReport:
    dist: np.ndarray
    laplacian: np.ndarray
    h: float
    a: float = 1.0

    @property
    def ratio(self) -> np.ndarray:
        """``Delta Phi * e^{a dist}``, the pointwise constant."""
        return self.laplacian * np.exp(self.a * self.dist)

    @property
    def c(self) -> float:
        return float(np.min(self.ratio))

    @property
    def c_q05(self) -> float:
        return float(np.quantile(self.ratio, 0.05))

    def fraction_above(self, level: float) -> float:
        return float(np.mean(self.ratio >= level))

    def to_csv(self) -> str:
        return _csv(zip(self.dist, self.laplacian, self.ratio),
                    ["dist_to_hull", "laplacian", "ratio"])


def subharmonicity_probe(phi, probes, h: float = 0.02, K: GeodesicHull | None = None,
                         a: float = 1.0, dist=None) -> SubharmonicityReport:
    """Finite-difference Laplacian of a field at probes.

    Fields exposing ``centered(c)`` (as :class:`PhiAssembly` does) are
    differentiated with their split fixed at each probe.  Distances come
    from K unless given.
    """
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    if dist is None:
        dist = np.zeros(len(P)) if K is None else np.atleast_1d(dist_to_hull(P, K, a)[0])
    lap = np.empty(len(P))
    for i, x in enumerate(P):
        f = phi.centered(x) if hasattr(phi, "centered") else phi
        lap[i] = float(np.atleast_1d(fd_laplacian(f, x, h, a))[0])
    return SubharmonicityReport(np.asarray(dist, dtype=float), lap, h, a)


def probes_near_geodesic(rng, count: int, n: int, dist_range=(0.0, 8.0),
                         along: float = 3.0, a: float = 1.0) -> np.ndarray:
    """Points at uniform distance from the geodesic through the origin along e_1."""
    g = as_stream(rng).gen
    s = g.uniform(-along, along, count) * a
    r = g.uniform(*dist_range, count) * a
    if n == 2:
        th = g.choice([0.0, np.pi], size=count)
    else:
        th = g.uniform(0, 2 * np.pi, count)
    # point at distance r from the line, foot at arclength s
    foot = np.stack([np.cosh(s), np.sinh(s)] + [np.zeros(count)] * (n - 1), axis=1)
    normal = np.zeros((count, n + 1))
    normal[:, 2] = np.cos(th)
    if n == 3:
        normal[:, 3] = np.sin(th)
    return np.cosh(r)[:, None] * foot + np.sinh(r)[:, None] * normal


__all__ = ["ProfileAuditError", "GreenHypothesisError", "delta_field", "delta_probe",
           "DeltaReport", "geodesic_distance_laplacian", "BumpProfile", "bump_profile",
           "ShellFunction", "phi_shell", "GreenSpec", "PhiAssembly", "assemble_phi",
           "SubharmonicityReport", "subharmonicity_probe", "probes_near_geodesic"]
