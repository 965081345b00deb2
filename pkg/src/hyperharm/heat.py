"""Heat kernels and Green's functions of H^2 and H^3, and their integrals over hull neighborhoods.

Kernels for curvature ``-a^2`` follow from the unit-curvature ones by
``H_a(rho, t) = a^n H_1(a rho, a^2 t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .fitting import decay_fit
from .geometry import SpaceConfig, ball_volume, sphere_area
from .hull import GeodesicHull, tube_samples
from .streams import as_stream

FLAVORS = ("exact-H2", "exact-H3", "davies-bound", "hyp-bound")


@dataclass(frozen=True)
class KernelModel:
    cfg: SpaceConfig
    flavor: str

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown kernel flavor {self.flavor!r}")
        if self.flavor.startswith("exact") and self.flavor != f"exact-H{self.cfg.n}":
            raise ValueError(f"{self.flavor} does not match n = {self.cfg.n}")

    @property
    def exact(self) -> bool:
        return self.flavor.startswith("exact")

    @classmethod
    def exact_for(cls, cfg: SpaceConfig) -> "KernelModel":
        return cls(cfg, f"exact-H{cfg.n}")


def _logsinh(x):
    x = np.asarray(x, dtype=float)
    return x + np.log1p(-np.exp(-2 * x)) - math.log(2.0)


def _log_h2_unit(rho: float, t: float) -> float:
    """log of the unit-curvature H^2 kernel by quadrature.

    Uses ``s = rho + u^2`` in the integral over ``s >= rho`` of
    ``s exp(-s^2/4t) / sqrt(cosh s - cosh rho)``, with ``exp(-rho^2/4t)`` and
    ``exp(-rho/2)`` pulled out so the integrand stays of order one.
    """
    rho = float(rho)
    shift = rho / 2.0

    def f(u):
        if u == 0.0:
            if rho == 0.0:
                return 0.0
            return 2.0 * rho * math.exp(shift - 0.5 * float(_logsinh(rho)))
        u2 = u * u
        s = rho + u2
        lg = (math.log(s) + math.log(2 * u) - (s * s - rho * rho) / (4 * t) + shift
              - 0.5 * (math.log(2.0) + float(_logsinh(rho + u2 / 2)) + float(_logsinh(u2 / 2))))
        return math.exp(lg)

    smax = 40.0 * math.sqrt(t) + 40.0
    U = math.sqrt(smax)
    knots = sorted({min(U, v) for v in (0.5, 1.0, 2.0, math.sqrt(2 * t) + 1.0)})
    total = 0.0
    lo = 0.0
    for hi in knots + [U]:
        if hi > lo:
            total += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)[0]
            lo = hi
    return (0.5 * math.log(2.0) - t / 4 - 1.5 * math.log(4 * math.pi * t) + math.log(total)
            - rho * rho / (4 * t) - shift)


def _log_h3_unit(rho, t):
    rho = np.asarray(rho, dtype=float)
    safe = np.where(rho > 1e-8, rho, 1.0)
    ratio = np.where(rho > 1e-8, np.log(safe) - _logsinh(safe), -rho**2 / 6)
    return -1.5 * np.log(4 * np.pi * t) + ratio - t - rho**2 / (4 * t)


def log_heat_kernel(model: KernelModel, rho, t):
    """Natural log of the exact kernel (only for the exact flavors)."""
    if not model.exact:
        raise ValueError("log_heat_kernel needs an exact flavor")
    t = float(t)
    if t <= 0:
        raise ValueError("heat kernel needs t > 0")
    a, n = model.cfg.a, model.cfg.n
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    if n == 3:
        out = _log_h3_unit(a * rho, a * a * t)
    else:
        flat = np.array([_log_h2_unit(r, a * a * t) for r in np.ravel(a * rho)])
        out = flat.reshape(rho.shape)
    return out + n * math.log(a)


def heat_kernel(model: KernelModel, rho, t):
    out = np.exp(log_heat_kernel(model, rho, t))
    return float(out) if np.ndim(out) == 0 else out


def heat_kernel_bound(model: KernelModel, rho, t):
    """The two large-time upper bounds with implicit constant 1.

    ``davies-bound``: ``(1 + rho^n) exp(-rho^2/4t - (n-1)^2 a^2 t / 4)``;
    ``hyp-bound``: ``(1 + rho^n) exp(-rho^2/4t - (n-1)^2 t/4 - (n-1) rho/2)``,
    stated for unit curvature and applied to ``(a rho, a^2 t)`` otherwise.
    """
    t = float(t)
    if t < 1:
        raise ValueError("the large-time bounds need t >= 1")
    n, a = model.cfg.n, model.cfg.a
    rho = np.asarray(rho, dtype=float)
    if model.flavor == "davies-bound":
        return (1 + rho**n) * np.exp(-rho**2 / (4 * t) - (n - 1) ** 2 * a * a * t / 4)
    if model.flavor == "hyp-bound":
        r, s = a * rho, a * a * t
        return (1 + r**n) * np.exp(-r**2 / (4 * s) - (n - 1) ** 2 * s / 4 - (n - 1) * r / 2)
    raise ValueError("heat_kernel_bound needs a bound flavor")


def bound_ratio_sweep(cfg: SpaceConfig, flavor: str, rho_grid, t_grid) -> dict:
    """Ratios exact / bound on a grid; the fitted constant is their maximum."""
    exact = KernelModel.exact_for(cfg)
    bound = KernelModel(cfg, flavor)
    rho_grid = np.asarray(rho_grid, dtype=float)
    ratios = np.empty((len(t_grid), len(rho_grid)))
    for i, t in enumerate(t_grid):
        lb = np.log(heat_kernel_bound(bound, rho_grid, t))
        ratios[i] = np.exp(log_heat_kernel(exact, rho_grid, t) - lb)
    c = float(ratios.max())
    return {"flavor": flavor, "constant": c, "ratios": ratios,
            "rho": rho_grid, "t": np.asarray(t_grid, dtype=float),
            "conforms": bool(np.all(ratios <= c * (1 + 1e-12)) and np.isfinite(c))}


def radial_mass(model: KernelModel, t: float) -> float:
    """Integral of the kernel over the whole space, by radial quadrature."""
    a, n = model.cfg.a, model.cfg.n
    area = sphere_area(n)

    def f(r):
        return float(heat_kernel(model, r, t)) * area * (math.sinh(a * r) / a) ** (n - 1)

    top = (2 * (n - 1) * a * t + 30 * math.sqrt(t) + 10) / a
    pts = np.linspace(0, top, 9)
    return float(sum(integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
                     for lo, hi in zip(pts[:-1], pts[1:])))


# ---------------------------------------------------------------------------
# Green's function


def greens_closed_form(cfg: SpaceConfig, rho):
    """``a e^{-a rho} / (4 pi sinh a rho)`` on H^3, ``log coth(a rho / 2) / 2 pi`` on H^2."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("Green's function needs rho > 0")
    a = cfg.a
    if cfg.n == 3:
        return a * np.exp(-a * rho) / (4 * np.pi * np.sinh(a * rho))
    return np.log(1.0 / np.tanh(a * rho / 2)) / (2 * np.pi)


def log_greens(cfg: SpaceConfig, rho):
    """Natural log of :func:`greens_closed_form`, accurate at large rho."""
    rho = np.asarray(rho, dtype=float)
    x = cfg.a * rho
    if cfg.n == 3:
        return math.log(cfg.a / (4 * np.pi)) - x - _logsinh(x)
    # log coth(x/2) = log1p(2 / (e^x - 1))
    return np.log(np.log1p(2.0 / np.expm1(x))) - math.log(2 * np.pi)


def _small_time_envelope(model, rho, t):
    """Gaussian continuation of a bound below t = 1, matched at t = 1."""
    n = model.cfg.n
    return heat_kernel_bound(model, rho, 1.0) * t ** (-n / 2) * math.exp(-rho**2 / (4 * t) + rho**2 / 4)


def greens_function(model: KernelModel, rho: float, t_split: float = 1.0,
                    tail_tol: float = 1e-9) -> float:
    """Time integral of the kernel, with an analytic tail.

    Past the cut-off T the kernel is at most ``c_T (1 + rho^n) exp(-lambda t)``
    with ``lambda = (n-1)^2 a^2 / 4`` and ``c_T`` the kernel-to-bound ratio at
    T (the ratio decreases in t), so the neglected tail is at most
    ``c_T (1 + rho^n) exp(-lambda T) / lambda``.  T doubles until that is
    below ``tail_tol`` times the integral.
    """
    rho = float(rho)
    if rho <= 0:
        raise ValueError("Green's function needs rho > 0")
    n, a = model.cfg.n, model.cfg.a
    lam = (n - 1) ** 2 * a * a / 4
    davies = KernelModel(model.cfg, "davies-bound")

    if model.exact:
        def H(t):
            return float(heat_kernel(model, rho, t)) if t > 0 else 0.0
    else:
        def H(t):
            if t <= 0:
                return 0.0
            if t < 1:
                return float(_small_time_envelope(model, rho, t))
            return float(heat_kernel_bound(model, rho, t))

    peak = max(rho * rho / (2 * n) / a**2, 1e-3)
    head_pts = sorted({p for p in (peak / 4, peak, 4 * peak) if 0 < p < t_split})
    total = 0.0
    lo = 0.0
    for hi in head_pts + [t_split]:
        total += integrate.quad(H, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        lo = hi
    T = max(2 * t_split, 8.0 / max(lam, 1e-12))
    total += integrate.quad(H, t_split, T, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    for _ in range(60):
        bnd = float(heat_kernel_bound(davies, rho, T))
        cT = H(T) / bnd if bnd > 0 else 0.0
        tail = cT * (1 + rho**n) * math.exp(-lam * T) / lam
        if tail <= tail_tol * total:
            return total
        T2 = 2 * T
        total += integrate.quad(H, T, T2, epsabs=0.0, epsrel=1e-12, limit=400)[0]
        T = T2
    raise RuntimeError("Green's function tail did not become small")


# ---------------------------------------------------------------------------
# integrals over hull neighborhoods


@dataclass
class ShellIntegral:
    t: float
    value: float
    stderr: float
    annuli: int
    tail_bound: float
    flagged: bool
    contributions: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"t": self.t, "value": self.value, "stderr": self.stderr, "annuli": self.annuli,
                "tail_bound": self.tail_bound, "flagged": self.flagged}


class ShellSampler:
    """Tube importance samples of ``N_d(K)`` around x, one unit annulus at a time.

    Samples are drawn lazily and cached, so sweeps over many times (or a
    Green's function integral) reuse the same points.
    """

    def __init__(self, K: GeodesicHull, x, d: float, samples: int, rng, a: float = 1.0):
        self.K, self.x, self.d, self.samples, self.a = K, np.asarray(x, dtype=float), d, samples, a
        self.rng = as_stream(rng)
        self._cache: list = []

    def annulus(self, k: int):
        while len(self._cache) <= k:
            j = len(self._cache)
            r, w, _ = tube_samples(self.K, self.x, float(j), float(j + 1), self.d, self.samples,
                                   self.rng.child(f"annulus{j}"), self.a)
            self._cache.append((r, w))
        return self._cache[k]

    def volumes(self, count: int) -> np.ndarray:
        return np.array([self.annulus(k)[1].mean() for k in range(count)])


def _growth_envelope(vols, ambient_rate):
    """Exponential rate used to extrapolate annulus volumes past the truncation."""
    idx = np.nonzero(vols > 0)[0]
    idx = idx[idx >= 2]
    if len(idx) >= 3:
        y = np.log(vols[idx])
        slope = np.polyfit(idx.astype(float), y, 1)[0]
        return float(min(max(slope, 0.0) + 0.1, ambient_rate))
    return ambient_rate


def _integrate_radial(sampler: ShellSampler, f, log_f_upper, min_annuli: int, cap: int,
                      tol: float, ambient_rate: float):
    """Sum of per-annulus estimates of the integral of radial ``f`` over the neighborhood.

    Stops once an extrapolated tail ``sum_k f_upper(k) V_K exp(r (k - K))`` is
    below ``tol`` times the running sum; ``f_upper(k)`` bounds ``f`` on annulus k
    and ``V_K`` is the last annulus volume.  A tail whose terms have not died
    out within 400 annuli counts as infinite.
    """
    contrib, var = [], []
    k = 0
    tail = np.inf
    while k < cap:
        r, w = sampler.annulus(k)
        z = w * f(r)
        contrib.append(z.mean())
        var.append(z.var(ddof=1) / len(z))
        k += 1
        if k < min_annuli:
            continue
        vols = sampler.volumes(k)
        rate = _growth_envelope(vols, ambient_rate)
        V = max(vols[-1], 1e-300)
        ks = np.arange(k, k + 400)
        logs = np.array([log_f_upper(j) for j in ks]) + math.log(V) + rate * (ks - k + 1)
        top = float(np.max(logs))
        tail = math.exp(min(top, 700.0)) * float(np.sum(np.exp(logs - top)))
        if logs[-1] > top + math.log(1e-3):
            tail = np.inf
        if tail <= tol * max(sum(contrib), 1e-300):
            break
    flagged = not (tail <= tol * max(sum(contrib), 1e-300))
    return np.asarray(contrib), float(np.sqrt(sum(var))), tail, flagged


def shell_heat_sweep(model: KernelModel, K: GeodesicHull, x, d: float, ts, rng, samples: int,
                     tol: float = 0.01, cap_radius: int = 60,
                     sampler: ShellSampler | None = None) -> list[ShellIntegral]:
    """Integral of ``H(x, ., t)`` over ``N_d(K)`` for each t, sharing one sample set."""
    if not model.exact:
        raise ValueError("shell integrals need an exact kernel flavor")
    a, n = model.cfg.a, model.cfg.n
    sampler = sampler or ShellSampler(K, x, d, samples, rng, a)
    out = []
    for t in ts:
        t = float(t)
        if t < 1:
            raise ValueError("shell integrals are taken for t >= 1")

        def f(r, t=t):
            return np.exp(log_heat_kernel(model, r, t))

        def f_up(k, t=t):
            return float(log_heat_kernel(model, float(k), t))

        lo = int(math.ceil(2 * (n - 1) * a * t)) + 3
        contrib, err, tail, flagged = _integrate_radial(sampler, f, f_up, lo, cap_radius, tol,
                                                        (n - 1) * a)
        out.append(ShellIntegral(t, float(contrib.sum()), err, len(contrib), tail, flagged, contrib))
    return out


def shell_heat_integral(model, K, x, d, t, rng, samples, **kw) -> ShellIntegral:
    return shell_heat_sweep(model, K, x, d, [t], rng, samples, **kw)[0]


def heat_decay_fit(results: list[ShellIntegral]):
    return decay_fit([r.t for r in results], [r.value for r in results],
                     [r.stderr for r in results])


@dataclass
class GreenShellReport:
    points: np.ndarray = field(repr=False)
    values: np.ndarray
    stderr: np.ndarray
    flagged: list

    @property
    def sup(self) -> float:
        return float(np.max(self.values))

    def to_dict(self):
        return {"values": self.values.tolist(), "stderr": self.stderr.tolist(),
                "sup": self.sup, "flagged": self.flagged}


def green_shell_integral(cfg: SpaceConfig, K: GeodesicHull, x, d: float, rng, samples: int,
                         tol: float = 0.01, cap_radius: int = 60, green=None, log_green=None):
    """Integral of ``G(x, .)`` over ``N_d(K)``: ``(value, stderr, flagged)``.

    The Green's function is the closed form (checked against time quadrature
    in the tests); integrating it directly equals the time integral of the
    shell heat integrals by Fubini.  A neighborhood whose volume grows at
    the ambient rate makes the integral diverge and is flagged.  ``green``
    and ``log_green`` replace the radial profile and its log (used to feed
    synthetic kernels through the same divergence test).
    """
    a, n = cfg.a, cfg.n
    sampler = ShellSampler(K, x, d, samples, rng, a)
    green = green or (lambda r: greens_closed_form(cfg, r))
    log_green = log_green or (lambda r: log_greens(cfg, r))

    def f(r):
        return green(np.maximum(r, 1e-12))

    def f_up(k):
        return float(log_green(max(float(k), 1e-3)))

    contrib, err, tail, flagged = _integrate_radial(sampler, f, f_up, 4, cap_radius, tol,
                                                    (n - 1) * a)
    vols = sampler.volumes(len(contrib))
    if _growth_envelope(vols, (n - 1) * a) >= (n - 1) * a - 1e-12:
        flagged = True
    return float(contrib.sum()), err, flagged


def greens_shell_bound(cfg: SpaceConfig, K: GeodesicHull, d: float, x_grid, rng,
                       samples: int, **kw) -> GreenShellReport:
    rng = as_stream(rng)
    vals, errs, flags = [], [], []
    for i, x in enumerate(np.atleast_2d(x_grid)):
        v, e, f = green_shell_integral(cfg, K, x, d, rng.child(f"x{i}"), samples, **kw)
        vals.append(v)
        errs.append(e)
        if f:
            flags.append(i)
    return GreenShellReport(np.atleast_2d(x_grid), np.asarray(vals), np.asarray(errs), flags)


def tube_volume_closed_form(cfg: SpaceConfig, d: float, length: float) -> float:
    """Volume of the radius-d tube around a geodesic segment of the given length."""
    a = cfg.a
    if cfg.n == 3:
        return math.pi * math.sinh(a * d) ** 2 * length / a**2
    return 2 * math.sinh(a * d) * length / a


__all__ = ["KernelModel", "heat_kernel", "log_heat_kernel", "heat_kernel_bound",
           "bound_ratio_sweep", "radial_mass", "greens_closed_form", "greens_function",
           "ShellIntegral", "ShellSampler", "shell_heat_sweep", "shell_heat_integral",
           "heat_decay_fit", "green_shell_integral", "greens_shell_bound", "ball_volume",
           "tube_volume_closed_form"]
