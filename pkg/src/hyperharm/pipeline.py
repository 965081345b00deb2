"""Experiment orchestration: configs, stages, reports.

A run walks the stages in dependency order:

    gen -> dim
    gen -> hull -> lipschitz, smooth, volume, heatdecay, green, phi
    hull (+ phi when enabled) -> sweep

Every stage draws from its own child stream of the config seed, so turning
one stage off never changes what another stage computes.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .barrier import (GreenSpec, ProfileAuditError, assemble_phi, bump_profile, delta_field,
                      delta_probe, subharmonicity_probe)
from .boundary import (BentPlaneFamily, bent_boundary, bent_embed, bent_unfold, box_dimension,
                       from_points, gen_cantor, gen_round_circle, gen_snowflake)
from .geometry import (GeometryError, SpaceConfig, exp_map, ideal_point, mink_norm, origin,
                       unit_distance)
from .harmonic import ball_sweep, measure_c_prime, schoen_yau_check
from .heat import KernelModel, greens_shell_bound, heat_decay_fit, shell_heat_sweep
from .hull import _line_normals, build_hull, dist_to_hull, lipschitz_profile, measure_pad, retract
from .hull import volume_profile
from .mollifier import probe_region, regularity_probe, smoothed_retraction
from .streams import RandomStream

SCHEMA_VERSION = 1

STAGES = ("gen", "dim", "hull", "lipschitz", "smooth", "volume", "heatdecay", "green", "phi",
          "sweep")

REQUIRES = {
    "gen": (),
    "dim": ("gen",),
    "hull": ("gen",),
    "lipschitz": ("hull",),
    "smooth": ("hull",),
    "volume": ("hull",),
    "heatdecay": ("hull",),
    "green": ("hull",),
    "phi": ("hull",),
    "sweep": ("hull",),
}

GENERATORS = ("cantor", "circle", "snowflake", "geodesic", "bent")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# configuration


DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "name": "experiment",
    "seed": None,
    "space": {"n": 3, "a": 1.0},
    "generator": {"kind": "cantor", "ratio": 1 / 3, "depth": 10, "m": 1024, "roughness": 0.2,
                  "theta": math.pi / 4},
    "hull": {"policy": "auto", "budget": 4096},
    "lipschitz": {"shells": [1, 2, 3, 4, 5], "pairs": 200},
    "mollifier": {"r": 0.4, "h": 0.1, "probes": 12},
    "volume": {"d": 2.0, "rho_max": 8.0, "samples": 100000},
    "kernel": {"d": 2.0, "t_grid": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10], "samples": 20000,
               "green_points": [0.0, 2.0, 5.0, 10.0], "green_samples": 4000},
    "subharmonic": {"C": 2.0, "probes": 200, "green_samples": 2000, "dist_range": [0.0, 8.0]},
    "solver": {"d_grid": [2.0, 3.0, 4.0], "h": 0.4, "tol": 1e-6, "max_iters": 200,
               "boundary_map": "retract"},
    "stages": list(STAGES),
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(path, message)


def _number(d: dict, key: str, path: str, lo=-math.inf, hi=math.inf, integer=False,
            open_lo=False, open_hi=False):
    v = d.get(key)
    ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    _require(ok, f"{path}.{key}", f"expected a number, got {v!r}")
    if integer:
        _require(float(v).is_integer(), f"{path}.{key}", f"expected an integer, got {v!r}")
    _require((v > lo if open_lo else v >= lo) and (v < hi if open_hi else v <= hi),
             f"{path}.{key}",
             f"{v!r} outside {'(' if open_lo else '['}{lo:g}, {hi:g}{')' if open_hi else ']'}")
    return v


@dataclass
class ExperimentConfig:
    """Validated experiment description (see ``DEFAULTS`` for the schema)."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("$", "config must be a JSON object")
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"$.{sorted(unknown)[0]}", "unknown field")
        data = _merge(DEFAULTS, raw)
        cls._validate(data)
        return cls(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @staticmethod
    def _validate(c: dict):
        _require(c["schema"] == SCHEMA_VERSION, "$.schema",
                 f"unsupported schema {c['schema']!r} (expected {SCHEMA_VERSION})")
        _require(c["seed"] is not None, "$.seed", "a seed is mandatory")
        _number(c, "seed", "$", 0, 2**63 - 1, integer=True)
        sp = c["space"]
        _require(sp.get("n") in (2, 3), "$.space.n", f"n must be 2 or 3, got {sp.get('n')!r}")
        _number(sp, "a", "$.space", 0, open_lo=True)
        g = c["generator"]
        kind = g.get("kind")
        _require(kind in GENERATORS, "$.generator.kind", f"unknown generator {kind!r}")
        if kind == "cantor":
            _number(g, "ratio", "$.generator", 0, 0.5, open_lo=True, open_hi=True)
            _number(g, "depth", "$.generator", 1, 16, integer=True)
        if kind in ("circle", "bent"):
            _number(g, "m", "$.generator", 4, 2**16, integer=True)
        if kind == "snowflake":
            _require(sp["n"] == 3, "$.space.n", "snowflake curves live at infinity of H^3")
            _number(g, "roughness", "$.generator", 0, 0.5)
            _number(g, "depth", "$.generator", 1, 10, integer=True)
        if kind == "bent":
            _number(g, "theta", "$.generator", 0, math.pi / 2, open_hi=True)
            _require(sp["n"] == 3, "$.space.n", "the bent plane lives in H^3")
        h = c["hull"]
        _require(h.get("policy") in ("auto", "all", "stratified", "chain"), "$.hull.policy",
                 f"unknown pair policy {h.get('policy')!r}")
        _number(h, "budget", "$.hull", 1, integer=True)
        L = c["lipschitz"]
        _require(isinstance(L.get("shells"), list) and len(L["shells"]) >= 2
                 and all(isinstance(s, (int, float)) and s > 0 for s in L["shells"]),
                 "$.lipschitz.shells", "need at least two positive shell distances")
        _number(L, "pairs", "$.lipschitz", 10, integer=True)
        m = c["mollifier"]
        _number(m, "h", "$.mollifier", 0, open_lo=True)
        _number(m, "r", "$.mollifier", 0, open_lo=True)
        _require(m["r"] > 2 * m["h"], "$.mollifier.r", "the net scale must exceed twice the spacing")
        _number(m, "probes", "$.mollifier", 2, integer=True)
        v = c["volume"]
        _number(v, "d", "$.volume", 0)
        _number(v, "rho_max", "$.volume", 2)
        _number(v, "samples", "$.volume", 100, integer=True)
        k = c["kernel"]
        _number(k, "d", "$.kernel", 0)
        _require(isinstance(k.get("t_grid"), list) and len(k["t_grid"]) >= 5
                 and all(isinstance(t, (int, float)) and t >= 1 for t in k["t_grid"]),
                 "$.kernel.t_grid", "need at least five times, all >= 1")
        _number(k, "samples", "$.kernel", 100, integer=True)
        _number(k, "green_samples", "$.kernel", 100, integer=True)
        _require(isinstance(k.get("green_points"), list) and len(k["green_points"]) >= 1,
                 "$.kernel.green_points", "need at least one hull distance")
        s = c["subharmonic"]
        _number(s, "C", "$.subharmonic", 1)
        _number(s, "probes", "$.subharmonic", 1, integer=True)
        _number(s, "green_samples", "$.subharmonic", 100, integer=True)
        dr = s.get("dist_range")
        _require(isinstance(dr, list) and len(dr) == 2 and 0 <= dr[0] < dr[1],
                 "$.subharmonic.dist_range", "need [lo, hi] with 0 <= lo < hi")
        so = c["solver"]
        grid = so.get("d_grid")
        _require(isinstance(grid, list) and len(grid) >= 2
                 and all(isinstance(d, (int, float)) for d in grid)
                 and all(b > a for a, b in zip(grid, grid[1:])),
                 "$.solver.d_grid", "need an increasing grid of at least two radii")
        _number(so, "h", "$.solver", 0, open_lo=True)
        _require(so["h"] <= grid[0] / 4, "$.solver.h", "mesh spacing must be at most d/4")
        _number(so, "tol", "$.solver", 0, open_lo=True)
        _number(so, "max_iters", "$.solver", 1, integer=True)
        bm = so.get("boundary_map")
        _require(bm in ("retract", "smoothed", "bent-unfold"), "$.solver.boundary_map",
                 f"unknown boundary map {bm!r}")
        _require((bm == "bent-unfold") == (kind == "bent"), "$.solver.boundary_map",
                 "bent-unfold goes with the bent generator and only with it")
        st = c["stages"]
        _require(isinstance(st, list) and all(x in STAGES for x in st), "$.stages",
                 f"stages must be drawn from {list(STAGES)}")
        for x in st:
            for dep in REQUIRES[x]:
                _require(dep in st, "$.stages", f"stage {x!r} needs {dep!r}")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def space(self) -> SpaceConfig:
        return SpaceConfig(int(self.data["space"]["n"]), float(self.data["space"]["a"]))

    def with_stages(self, stages) -> "ExperimentConfig":
        """The same config restricted to ``stages`` plus their dependencies."""
        want = set()

        def add(s):
            if s not in want:
                want.add(s)
                for dep in REQUIRES[s]:
                    add(dep)
        for s in stages:
            add(s)
        d = copy.deepcopy(self.data)
        d["stages"] = [s for s in STAGES if s in want]
        return ExperimentConfig.from_dict(d)

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


# ---------------------------------------------------------------------------
# reports


def quantity(value, stderr=None, tol=None) -> dict:
    """A reported number with its uncertainty (Monte Carlo stderr or a tolerance)."""
    q = {"value": float(value)}
    if stderr is not None:
        q["stderr"] = float(stderr)
    else:
        q["tol"] = float(0.0 if tol is None else tol)
    return q


def band(name: str, value: float, op: str, threshold, stderr=None) -> dict:
    value = float(value)
    if op == "<=":
        ok = value <= threshold
    elif op == ">=":
        ok = value >= threshold
    elif op == "in":
        ok = threshold[0] <= value <= threshold[1]
    elif op == "true":
        ok = bool(value)
    else:
        raise ValueError(f"unknown band operator {op!r}")
    thr = [float(t) for t in threshold] if isinstance(threshold, (list, tuple)) else threshold
    out = {"name": name, "value": value, "op": op, "threshold": thr, "pass": bool(ok)}
    if stderr is not None:
        out["stderr"] = float(stderr)
    return out


@dataclass
class StageResult:
    status: str = "pending"
    outputs: dict = field(default_factory=dict)
    bands: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    error: str | None = None
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"status": self.status, "outputs": self.outputs, "bands": self.bands,
                "tables": self.tables, "series": self.series, "error": self.error,
                "seconds": self.seconds}


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    stages: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return any(s.status in ("error", "skipped", "pending") for s in self.stages.values())

    @property
    def passed(self) -> bool:
        return bool(self.stages) and all(s.passed for s in self.stages.values())

    def numeric(self) -> dict:
        """Everything that must be reproducible (timings and versions excluded)."""
        return {"config": self.config.data,
                "stages": {k: {kk: vv for kk, vv in v.to_dict().items() if kk != "seconds"}
                           for k, v in self.stages.items()}}

    def hash(self) -> str:
        text = json.dumps(self.numeric(), sort_keys=True, separators=(",", ":"), allow_nan=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {"name": self.config["name"], "passed": self.passed, "partial": self.partial,
                "report_hash": self.hash(), "provenance": self.provenance,
                "config": self.config.data,
                "stages": {k: v.to_dict() for k, v in self.stages.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        rep = cls(ExperimentConfig.from_dict(d["config"]), provenance=d.get("provenance", {}))
        for k, v in d["stages"].items():
            rep.stages[k] = StageResult(**v)
        return rep

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# stage helpers


def expected_dimension(cfg: ExperimentConfig) -> float | None:
    g = cfg["generator"]
    if g["kind"] == "cantor":
        return math.log(2) / math.log(1 / g["ratio"])
    if g["kind"] in ("circle", "bent"):
        return 1.0
    if g["kind"] == "geodesic":
        return 0.0
    return None


def generate(cfg: ExperimentConfig):
    g, n = cfg["generator"], cfg["space"]["n"]
    kind = g["kind"]
    if kind == "cantor":
        return gen_cantor(float(g["ratio"]), int(g["depth"]), n)
    if kind == "circle":
        return gen_round_circle(int(g["m"]), n)
    if kind == "snowflake":
        return gen_snowflake(float(g["roughness"]), int(g["depth"]), n)
    if kind == "geodesic":
        e = np.zeros((2, n))
        e[0, 0], e[1, 0] = 1.0, -1.0
        return from_points(ideal_point(e), {"kind": "geodesic", "n": n})
    return bent_boundary(BentPlaneFamily(float(g["theta"])), int(g["m"]))


def probes_near_hull(K, rng, count: int, dist_range=(0.0, 8.0), along: float = 3.0,
                     a: float = 1.0) -> np.ndarray:
    """Points at prescribed distances from lines of K passing near the origin.

    The distance to K itself can only be smaller; callers measure it.
    """
    g = rng.gen
    n = K.n
    b, u = K.line_frames()
    near = np.nonzero(b[:, 0] <= math.cosh(1.0))[0]
    if len(near) == 0:
        near = np.argsort(b[:, 0])[:1]
    pick = near[g.integers(0, len(near), count)]
    s = g.uniform(-along, along, count) * a
    foot = np.cosh(s)[:, None] * b[pick] + np.sinh(s)[:, None] * u[pick]
    tang = np.sinh(s)[:, None] * b[pick] + np.cosh(s)[:, None] * u[pick]
    N = np.stack(_line_normals(foot, tang, n), axis=1)
    w = g.standard_normal((count, n - 1))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    v = np.einsum("ik,ikj->ij", w, N)
    v /= mink_norm(v)[:, None]
    r = g.uniform(*dist_range, count) * a
    return exp_map(foot, r[:, None] * v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def boundary_map(cfg: ExperimentConfig, K, center, d_max: float):
    """The boundary data r~ of the sweep, plus the map into the target used for sampling."""
    so, a = cfg["solver"], cfg["space"]["a"]
    if so["boundary_map"] == "bent-unfold":
        fam = BentPlaneFamily(float(cfg["generator"]["theta"]))
        return lambda P: bent_unfold(fam, retract(P, K))
    if so["boundary_map"] == "smoothed":
        m = cfg["mollifier"]
        reach = d_max + so["h"] + m["r"]
        region = probe_region(np.asarray(center)[None], reach, a)
        return smoothed_retraction(K, region, m["r"], m["h"], a)
    return lambda P: retract(P, K)


# ---------------------------------------------------------------------------
# stages


class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = RandomStream(cfg.seed)
        self.S = None
        self.K = None
        self.phi = None
        self.phi_c = None

    def rng(self, stage: str) -> RandomStream:
        return self.root.child(stage)


def _stage_gen(ctx, res):
    ctx.S = generate(ctx.cfg)
    res.outputs["points"] = quantity(len(ctx.S))
    res.outputs["resolution"] = quantity(ctx.S.resolution, tol=1e-12)


def _stage_dim(ctx, res):
    est = box_dimension(ctx.S)
    n = ctx.cfg["space"]["n"]
    res.outputs["beta"] = quantity(est.beta, stderr=est.residual)
    res.tables["covering"] = _csv_text(["eps", "count"], zip(est.scales, est.counts))
    res.bands.append(band("beta < n - 1", est.beta, "<=", n - 1 - 1e-9, est.residual))
    beta0 = expected_dimension(ctx.cfg)
    if beta0 is not None and beta0 > 0:
        res.bands.append(band("beta matches construction", est.beta, "in",
                              (beta0 - 0.05, beta0 + 0.05), est.residual))


def _stage_hull(ctx, res):
    h = ctx.cfg["hull"]
    ctx.K = build_hull(ctx.S, h["policy"], int(h["budget"]), rng=ctx.rng("hull"))
    pad = measure_pad(ctx.S, ctx.K, ctx.rng("hull").child("pad"), a=ctx.cfg["space"]["a"])
    ctx.K.pad = pad
    res.outputs["lines"] = quantity(len(ctx.K))
    res.outputs["pad"] = quantity(pad, tol=0.0)


def _stage_lipschitz(ctx, res):
    L, a = ctx.cfg["lipschitz"], ctx.cfg["space"]["a"]
    prof = lipschitz_profile(ctx.K, ctx.rng("lipschitz"), tuple(L["shells"]), int(L["pairs"]), a=a)
    res.outputs["slope"] = quantity(prof.slope, stderr=prof.slope_stderr)
    res.tables["lipschitz"] = prof.to_csv()
    res.series["lipschitz"] = {"x": list(map(float, prof.shells)),
                               "y": list(map(float, prof.ratios)),
                               "rate": -float(prof.slope), "xlabel": "hull distance s",
                               "ylabel": "max Lipschitz ratio",
                               "band": [0.7 * a, 1.25 * a]}
    res.bands.append(band("slope in [-1.25a, -0.7a]", prof.slope, "in", (-1.25 * a, -0.7 * a),
                          prof.slope_stderr))


def _stage_smooth(ctx, res):
    m, a, n = ctx.cfg["mollifier"], ctx.cfg["space"]["a"], ctx.cfg["space"]["n"]
    probes = probes_near_hull(ctx.K, ctx.rng("smooth"), int(m["probes"]), (1.0, 5.0), 1.0, a)
    region = probe_region(probes, m["r"] + 0.2, a)
    fmap = smoothed_retraction(ctx.K, region, m["r"], m["h"], a)
    rep = regularity_probe(fmap, ctx.K, probes, 0.02, a, region=region)
    res.outputs["grad_max"] = quantity(np.max(rep.grad), tol=0.02)
    res.outputs["hess_max"] = quantity(np.max(rep.hess), tol=0.02)
    res.outputs["grad_slope"] = quantity(rep.grad_slope, tol=0.02)
    res.outputs["net_centers"] = quantity(len(fmap.net))
    res.tables["regularity"] = rep.to_csv()
    finite = bool(np.all(np.isfinite(rep.grad)) and np.all(np.isfinite(rep.hess)))
    res.bands.append(band("derivatives finite", finite, "true", True))


def _stage_volume(ctx, res):
    v, a, n = ctx.cfg["volume"], ctx.cfg["space"]["a"], ctx.cfg["space"]["n"]
    prof = volume_profile(ctx.K, origin(n), float(v["d"]), float(v["rho_max"]), int(v["samples"]),
                          ctx.rng("volume"), a)
    res.outputs["rate"] = quantity(prof.fitted_rate, stderr=prof.rate_stderr)
    res.tables["volume"] = prof.to_csv()
    live = prof.shell_volume > 0
    res.series["volume"] = {"x": list(map(float, prof.rho_grid[live])),
                            "y": list(map(float, prof.shell_volume[live])),
                            "rate": -float(prof.fitted_rate), "xlabel": "rho",
                            "ylabel": "volume of N_d(K) in annulus"}
    beta = expected_dimension(ctx.cfg)
    if ctx.cfg["generator"]["kind"] in ("circle", "bent"):
        res.bands.append(band("rate within 0.15 of a", prof.fitted_rate, "in",
                              (a - 0.15, a + 0.15), prof.rate_stderr))
    elif beta is not None:
        res.bands.append(band("rate <= a beta + 0.3", prof.fitted_rate, "<=", a * beta + 0.3,
                              prof.rate_stderr))


def _stage_heatdecay(ctx, res):
    k, cfgs = ctx.cfg["kernel"], ctx.cfg.space
    model = KernelModel.exact_for(cfgs)
    out = shell_heat_sweep(model, ctx.K, origin(cfgs.n), float(k["d"]), k["t_grid"],
                           ctx.rng("heatdecay"), int(k["samples"]))
    fit = heat_decay_fit(out)
    res.outputs["rate"] = quantity(fit.rate, stderr=fit.stderr)
    res.outputs["flagged"] = quantity(sum(r.flagged for r in out))
    res.tables["heatdecay"] = _csv_text(["t", "value", "stderr"],
                                        [(r.t, r.value, r.stderr) for r in out])
    beta = expected_dimension(ctx.cfg)
    if beta is None:
        beta = float(ctx.stage_value("dim", "beta", 1.0))
    thr = 0.5 * beta * (cfgs.n - 1 - beta) * cfgs.a**2
    res.series["heatdecay"] = {"x": [r.t for r in out], "y": [r.value for r in out],
                               "err": [r.stderr for r in out], "rate": fit.rate,
                               "intercept": fit.intercept, "xlabel": "t",
                               "ylabel": "heat mass on N_d(K)", "band": [thr]}
    res.bands.append(band("rate >= beta(n-1-beta)/2", fit.rate, ">=", thr, fit.stderr))
    res.bands.append(band("stderr <= 20% of rate", fit.stderr, "<=", 0.2 * abs(fit.rate)))
    res.bands.append(band("no flagged integrals", not any(r.flagged for r in out), "true", True))


def _stage_green(ctx, res):
    k, cfgs = ctx.cfg["kernel"], ctx.cfg.space
    n = cfgs.n
    b, u = ctx.K.line_frames()
    i0 = int(np.argmin(b[:, 0]))
    N = _line_normals(b[i0:i0 + 1], u[i0:i0 + 1], n)[0][0]
    xs = np.array([exp_map(b[i0], s * cfgs.a * N) for s in k["green_points"]])
    rep = greens_shell_bound(cfgs, ctx.K, float(k["d"]), xs, ctx.rng("green"),
                             int(k["green_samples"]))
    dist = np.atleast_1d(dist_to_hull(xs, ctx.K, cfgs.a)[0])
    for s, v, e in zip(k["green_points"], rep.values, rep.stderr):
        res.outputs[f"potential@{s:g}"] = quantity(v, stderr=e)
    res.outputs["sup"] = quantity(rep.sup, stderr=float(rep.stderr[np.argmax(rep.values)]))
    res.tables["green"] = _csv_text(["dist_to_hull", "value", "stderr"],
                                    zip(dist, rep.values, rep.stderr))
    res.bands.append(band("potential finite", not rep.flagged, "true", True))
    far, near = int(np.argmax(dist)), int(np.argmin(dist))
    res.bands.append(band("far <= near", rep.values[far] - rep.values[near], "<=",
                          2 * float(rep.stderr[far] + rep.stderr[near])))


def _stage_phi(ctx, res):
    s, cfgs = ctx.cfg["subharmonic"], ctx.cfg.space
    a, n = cfgs.a, cfgs.n
    rng = ctx.rng("phi")
    delta = delta_field(ctx.K, a)
    # other lines of K may pass closer than the one a probe was built from
    dprobes = probes_near_hull(ctx.K, rng.child("delta"), 600, (2.5, 8.0), 2.0, a)
    dprobes = dprobes[np.atleast_1d(dist_to_hull(dprobes, ctx.K, a)[0]) >= 2.0][:60]
    if len(dprobes) < 10:
        raise GeometryError("too few probes at hull distance >= 2")
    drep = delta_probe(delta, ctx.K, dprobes, a=a)
    A, B = drep.min_laplacian, drep.max_gradient**2
    profile = bump_profile(A, B, a)
    audit = profile.audit()
    res.outputs["A"] = quantity(A, tol=1e-3)
    res.outputs["B"] = quantity(B, tol=1e-3)
    res.outputs["eps"] = quantity(profile.eps, tol=1e-3)
    res.bands.append(band("profile audit", audit["ok"], "true", True))
    if not audit["ok"]:
        raise ProfileAuditError(json.dumps(audit))
    green = GreenSpec.closed_form(cfgs, int(s["green_samples"]), int(rng.child("green").seed % 2**31))
    phi = assemble_phi(cfgs, ctx.K, profile, green, float(s["C"]))
    probes = probes_near_hull(ctx.K, rng.child("probes"), int(s["probes"]), tuple(s["dist_range"]),
                              2.0, a)
    rep = subharmonicity_probe(phi, probes, 0.02, ctx.K, a)
    sup = phi.measure_sup(probes)
    frac = rep.fraction_above(0.5)
    res.outputs["c"] = quantity(rep.c, tol=2e-4)
    res.outputs["c_q05"] = quantity(rep.c_q05, tol=2e-4)
    res.outputs["sup_abs_phi"] = quantity(sup, stderr=phi.green_stderr)
    res.outputs["fraction_ratio_ge_half"] = quantity(frac, tol=1.0 / max(len(probes), 1))
    res.tables["subharmonicity"] = rep.to_csv()
    res.bands.append(band("Delta Phi >= 0.5 e^{-a dist} at 95% of probes", frac, ">=", 0.95))
    res.bands.append(band("Delta Phi > 0 at 99% of probes", float(np.mean(rep.laplacian > 0)),
                          ">=", 0.99))
    ctx.phi, ctx.phi_c = phi, rep.c


def _stage_sweep(ctx, res):
    so, cfgs = ctx.cfg["solver"], ctx.cfg.space
    a, n = cfgs.a, cfgs.n
    center = origin(n)
    grid = [float(d) for d in so["d_grid"]]
    rmap = boundary_map(ctx.cfg, ctx.K, center, grid[-1])
    sw = ball_sweep(rmap, center, grid, float(so["h"]), float(so["tol"]), a, int(so["max_iters"]))
    for d, rep in zip(grid, sw.reports):
        res.outputs[f"sup_dist@{d:g}"] = quantity(rep.sup_dist, tol=rep.residual)
        res.outputs[f"iterations@{d:g}"] = quantity(rep.iterations)
    res.outputs["plateau_ratio"] = quantity(sw.plateau_ratio, tol=0.0)
    res.tables["sweep"] = _csv_text(["d", "sup_dist", "residual", "iterations"],
                                    [(d, r.sup_dist, r.residual, r.iterations)
                                     for d, r in zip(grid, sw.reports)])
    res.tables["trace"] = sw.reports[-1].trace_csv()
    res.bands.append(band("all solves converged", not sw.flagged, "true", True))
    res.bands.append(band("plateau sup_dist(d_max) <= 1.1 sup_dist(d_max/1.5)",
                          sw.plateau_ratio, "<=", 1.1))
    mesh, hmap = sw.meshes[-1], sw.maps[-1]
    R = np.asarray(rmap(mesh.points), dtype=float)
    sy = schoen_yau_check(hmap, R, mesh)
    res.outputs["schoen_yau_fraction"] = quantity(sy.fraction_ok, tol=sy.slack)
    res.bands.append(band("Schoen-Yau at 95% of probes", sy.fraction_ok, ">=", 0.95))
    if ctx.cfg["generator"]["kind"] == "bent":
        fam = BentPlaneFamily(float(ctx.cfg["generator"]["theta"]))
        g = ctx.rng("sweep").child("iota").gen
        window = grid[0] - so["h"]
        sups = []
        for d, hm in zip(grid, sw.maps):
            rad = window * np.sqrt(g.random(2000))
            ang = g.uniform(0, 2 * np.pi, 2000)
            x = np.stack([np.cosh(rad), np.sinh(rad) * np.cos(ang), np.sinh(rad) * np.sin(ang)], 1)
            sups.append(float(np.max(unit_distance(x, hm.evaluate(bent_embed(fam, x))) / a)))
            res.outputs[f"iota_dist@{d:g}"] = quantity(sups[-1], tol=so["h"])
        i, j = sw.plateau_pair
        ratio = sups[j] / sups[i] if sups[i] > 0 else float("inf")
        res.outputs["iota_plateau_ratio"] = quantity(ratio, tol=0.0)
        res.bands.append(band("sup dist(x, h(iota x)) finite", math.isfinite(sups[-1]), "true", True))
        res.bands.append(band("sup dist(x, h(iota x)) plateau", ratio, "<=", 1.1))
    if ctx.phi is not None:
        dist = np.atleast_1d(dist_to_hull(mesh.points, ctx.K, a)[0])
        cp = measure_c_prime(mesh, R, dist, ctx.phi_c)
        D = 2 * cp * ctx.phi.sup_bound
        res.outputs["C_prime"] = quantity(cp, tol=0.0)
        res.outputs["D"] = quantity(D, stderr=2 * cp * ctx.phi.green_stderr)
        res.bands.append(band("sup_dist(d_max) <= 2 C' sup|Phi|", sw.sup_dist[-1], "<=", D))
    ctx.sweep = sw


RUNNERS = {"gen": _stage_gen, "dim": _stage_dim, "hull": _stage_hull,
           "lipschitz": _stage_lipschitz, "smooth": _stage_smooth, "volume": _stage_volume,
           "heatdecay": _stage_heatdecay, "green": _stage_green, "phi": _stage_phi,
           "sweep": _stage_sweep}


def run(config: ExperimentConfig | dict, log=None) -> ExperimentReport:
    """Execute the enabled stages; a failing stage aborts everything downstream of it."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    ctx = _Context(cfg)
    report = ExperimentReport(cfg, provenance={
        "config_hash": cfg.hash(), "version": __version__, "backend": _backend.BACKEND,
        "numpy": np.__version__, "python": platform.python_version()})
    ctx.stage_value = lambda st, key, default: (report.stages[st].outputs[key]["value"]
                                                if st in report.stages and report.stages[st].passed
                                                else default)
    broken = set()
    for name in STAGES:
        if name not in cfg["stages"]:
            continue
        res = StageResult()
        report.stages[name] = res
        if any(dep in broken for dep in REQUIRES[name]):
            res.status = "skipped"
            res.error = "upstream stage failed"
            broken.add(name)
            continue
        t0 = time.perf_counter()
        try:
            RUNNERS[name](ctx, res)
        except (GeometryError, ValueError, ArithmeticError, RuntimeError, AssertionError) as exc:
            res.status = "error"
            res.error = f"{type(exc).__name__}: {exc}"
            broken.add(name)
        else:
            res.status = "pass" if all(b["pass"] for b in res.bands) else "fail"
        res.seconds = time.perf_counter() - t0
        if log:
            log(f"{name:10s} {res.status:7s} {res.seconds:8.2f}s")
    return report


# ---------------------------------------------------------------------------
# output files


def _svg_plot(series: dict, title: str, partial: bool) -> str:
    """Log-linear scatter with its fitted line and horizontal/slope bands."""
    W, H, L, R_, T, B = 480, 320, 60, 20, 30, 40
    x = np.asarray(series["x"], dtype=float)
    y = np.log(np.maximum(np.asarray(series["y"], dtype=float), 1e-300))
    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    intercept = series.get("intercept")
    if intercept is None:
        intercept = float(np.mean(y + series["rate"] * x))
    fit = intercept - series["rate"] * np.array([xlo, xhi])
    ylo, yhi = float(min(y.min(), fit.min())), float(max(y.max(), fit.max()))
    if yhi == ylo:
        yhi = ylo + 1.0

    def px(v):
        return L + (v - xlo) / (xhi - xlo) * (W - L - R_)

    def py(v):
        return H - B - (v - ylo) / (yhi - ylo) * (H - T - B)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">',
             f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
             f'<line class="axis" x1="{L}" y1="{H - B}" x2="{W - R_}" y2="{H - B}" stroke="black"/>',
             f'<line class="axis" x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
             f'<text x="{W / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="11">'
             f'{series.get("xlabel", "x")}</text>',
             f'<text x="14" y="{H / 2:.1f}" font-size="11" transform="rotate(-90 14 {H / 2:.1f})" '
             f'text-anchor="middle">log {series.get("ylabel", "y")}</text>']
    for lo_b in series.get("band", []) or []:
        # a decay rate threshold, drawn as the slowest admissible line through the first point
        yb = y[0] - lo_b * (np.array([xlo, xhi]) - x[0])
        parts.append(f'<line class="band" x1="{px(xlo):.2f}" y1="{py(yb[0]):.2f}" '
                     f'x2="{px(xhi):.2f}" y2="{py(yb[1]):.2f}" stroke="green" '
                     f'stroke-dasharray="4 3"/>')
    parts.append(f'<line class="fit" x1="{px(xlo):.2f}" y1="{py(fit[0]):.2f}" x2="{px(xhi):.2f}" '
                 f'y2="{py(fit[1]):.2f}" stroke="crimson" stroke-width="1.5"/>')
    for xi, yi in zip(x, y):
        parts.append(f'<circle class="marker" cx="{px(xi):.2f}" cy="{py(yi):.2f}" r="3" fill="navy"/>')
    parts.append(f'<text x="{W - R_}" y="{T + 12}" text-anchor="end" font-size="11">'
                 f'rate {series["rate"]:.4g}</text>')
    if partial:
        parts.append(f'<text class="partial" x="{L + 6}" y="{T + 12}" font-size="12" '
                     f'fill="darkorange">partial</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_report(report: ExperimentReport, outdir, formats=("csv", "json", "svg")) -> list:
    """Write CSV tables, the JSON summary and SVG decay plots; returns the paths written."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "json":
            p = out / "report.json"
            p.write_text(report.to_json())
            written.append(p)
        elif fmt == "csv":
            for st, res in report.stages.items():
                for name, text in res.tables.items():
                    p = out / f"{st}-{name}.csv"
                    p.write_text(text)
                    written.append(p)
        elif fmt == "svg":
            for st, res in report.stages.items():
                for name, s in res.series.items():
                    p = out / f"{st}-{name}.svg"
                    p.write_text(_svg_plot(s, f"{report.config['name']}: {name}",
                                           report.partial or not res.passed))
                    written.append(p)
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    return written


def read_csv(text: str):
    """Parse a table written by the pipeline back into a header and float rows."""
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def bundled_config(name: str) -> ExperimentConfig:
    path = Path(__file__).parent / "configs" / (name if name.endswith(".json") else name + ".json")
    return ExperimentConfig.load(path)


__all__ = ["ConfigError", "ExperimentConfig", "ExperimentReport", "StageResult", "STAGES",
           "run", "write_report", "read_csv", "bundled_config", "quantity", "band",
           "probes_near_hull", "boundary_map", "generate"]
