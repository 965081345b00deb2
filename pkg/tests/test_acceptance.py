"""The ten end-to-end acceptance criteria, each at its stated tolerance and time budget.

Every test appends one ``criterion k: PASS|FAIL ...`` line to the summary
printed at the end of the session, whatever the assertion outcome.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from hyperharm.barrier import (GreenSpec, assemble_phi, bump_profile, delta_field, delta_probe,
                               phi_shell, probes_near_geodesic, subharmonicity_probe)
from hyperharm.boundary import from_points
from hyperharm.geometry import (SpaceConfig, distance, exp_map, ideal_point, log_map, mink_norm,
                                polar_point, random_directions, random_far_isometry)
from hyperharm.heat import (KernelModel, bound_ratio_sweep, greens_closed_form, greens_function,
                            heat_kernel, radial_mass)
from hyperharm.hull import build_hull
from hyperharm.pipeline import bundled_config, run
from hyperharm.streams import RandomStream

pytestmark = pytest.mark.slow

CANTOR_STAGES = ["gen", "dim", "hull", "lipschitz", "volume", "heatdecay", "green"]


def record(k, ok, detail, seconds):
    ACCEPTANCE_LINES.append(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}  "
                            f"[{seconds:.1f}s]")


def bands(report, stage):
    return {b["name"]: b for b in report.stages[stage].bands}


def timed_run(cfg):
    t0 = time.perf_counter()
    rep = run(cfg)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cantor_run():
    return timed_run(bundled_config("thm13-cantor-h3").with_stages(CANTOR_STAGES))


@pytest.fixture(scope="module")
def circle_run():
    return timed_run({"seed": 31, "name": "circle-h3", "space": {"n": 3},
                      "generator": {"kind": "circle", "m": 4096},
                      "stages": ["gen", "hull", "lipschitz", "volume"]})


@pytest.fixture(scope="module")
def geodesic_run():
    return timed_run({"seed": 37, "name": "geodesic-h3", "space": {"n": 3},
                      "generator": {"kind": "geodesic"}, "stages": ["gen", "hull", "lipschitz"]})


@pytest.fixture(scope="module")
def sweep_run():
    return timed_run(bundled_config("geodesic-h2-sweep"))


# ---------------------------------------------------------------------------


def test_criterion_01_geometry():
    t0 = time.perf_counter()
    rng = RandomStream(101)
    N = 1000
    worst = {}
    for n in (2, 3):
        def pts(rmax):
            return polar_point(random_directions(rng, N, n), rng.gen.uniform(0, rmax, N))
        X, Y, Z = pts(4.0), pts(4.0), pts(4.0)
        dxy, dyz, dxz = distance(X, Y), distance(Y, Z), distance(X, Z)
        worst[f"tri{n}"] = float(np.max(dxz - dxy - dyz))
        worst[f"sym{n}"] = float(np.max(np.abs(dxy - distance(Y, X))))
        worst[f"id{n}"] = float(np.max(distance(X, X)))
        worst[f"pos{n}"] = float(np.min(dxy[dxy > 0])) if np.any(dxy > 0) else 1.0
        # roundtrip pairs at distance up to 10, based within 2 of the origin; far out the
        # ambient coordinates themselves lose the digits (see the geometry tests)
        B = pts(2.0)
        V = log_map(B, Y)
        V *= (rng.gen.uniform(0, 10, N) / mink_norm(V))[:, None]
        T = exp_map(B, V)
        worst[f"rt{n}"] = float(np.max(distance(exp_map(B, log_map(B, T)), T)))
        g = random_far_isometry(rng, 2.0, n)
        worst[f"iso{n}"] = float(np.max(np.abs(distance(g.apply(X), g.apply(Y)) - dxy)))
    secs = time.perf_counter() - t0
    ok = (max(worst["tri2"], worst["tri3"]) <= 1e-9 and max(worst["sym2"], worst["sym3"]) <= 1e-12
          and max(worst["id2"], worst["id3"]) <= 1e-7 and min(worst["pos2"], worst["pos3"]) > 0
          and max(worst["rt2"], worst["rt3"]) < 1e-9 and max(worst["iso2"], worst["iso3"]) < 1e-8
          and secs < 10)
    record(1, ok, f"roundtrip {max(worst['rt2'], worst['rt3']):.1e}, "
                  f"isometry {max(worst['iso2'], worst['iso3']):.1e}", secs)
    assert ok, worst


def _pde_residual(model, rho, t, h=1e-3):
    a, n = model.cfg.a, model.cfg.n

    def H(r, s):
        return float(heat_kernel(model, r, s))
    dt = (H(rho, t + h) - H(rho, t - h)) / (2 * h)
    hr = (H(rho + h, t) - H(rho - h, t)) / (2 * h)
    hrr = (H(rho + h, t) - 2 * H(rho, t) + H(rho - h, t)) / h**2
    lap = hrr + (n - 1) * a / math.tanh(a * rho) * hr
    return abs(dt - lap) / max(abs(dt), abs(lap))


def test_criterion_02_h3_kernel():
    t0 = time.perf_counter()
    cfg = SpaceConfig(3, 1.0)
    m = KernelModel.exact_for(cfg)
    mass = max(abs(radial_mass(m, t) - 1) for t in (0.25, 1.0, 4.0))
    resid = max(_pde_residual(m, rho, t) for rho in (0.5, 1.0, 2.0, 4.0, 8.0)
                for t in (0.25, 1.0, 4.0))
    green = abs(greens_function(m, 1.0) - float(greens_closed_form(cfg, 1.0)))
    secs = time.perf_counter() - t0
    ok = mass <= 1e-6 and resid <= 0.02 and green <= 1e-4 and secs < 60
    record(2, ok, f"mass {mass:.1e}, PDE residual {resid:.1e}, Green(1) {green:.1e}", secs)
    assert ok


def test_criterion_03_bounds():
    t0 = time.perf_counter()
    rho, t = np.linspace(0, 20, 81), np.linspace(1, 16, 31)
    consts = {}
    ok = True
    for n in (2, 3):
        for flavor in ("hyp-bound", "davies-bound"):
            rep = bound_ratio_sweep(SpaceConfig(n, 1.0), flavor, rho, t)
            consts[f"H{n}/{flavor}"] = rep["constant"]
            ok &= bool(rep["conforms"]) and math.isfinite(rep["constant"])
    secs = time.perf_counter() - t0
    ok &= secs < 60
    record(3, ok, "constants " + ", ".join(f"{k} {v:.3g}" for k, v in consts.items()), secs)
    assert ok


def test_criterion_04_lipschitz(geodesic_run, circle_run, cantor_run):
    slopes, ok = {}, True
    for name, (rep, secs) in (("geodesic", geodesic_run), ("circle", circle_run),
                              ("cantor", cantor_run)):
        st = rep.stages["lipschitz"]
        slopes[name] = st.outputs["slope"]["value"]
        ok &= st.passed and -1.25 <= slopes[name] <= -0.7 and st.seconds < 300
    total = sum(r.stages["lipschitz"].seconds for r, _ in (geodesic_run, circle_run, cantor_run))
    record(4, ok, "slopes " + ", ".join(f"{k} {v:.3f}" for k, v in slopes.items()), total)
    assert ok


def test_criterion_05_volume(circle_run, cantor_run):
    circ, cant = circle_run[0].stages["volume"], cantor_run[0].stages["volume"]
    rc, rk = circ.outputs["rate"]["value"], cant.outputs["rate"]["value"]
    beta = math.log(2) / math.log(3)
    secs = circ.seconds + cant.seconds
    ok = abs(rc - 1.0) <= 0.15 and rk <= beta + 0.3 and circ.passed and cant.passed
    ok &= all(r[0].config["volume"]["samples"] >= 100_000 for r in (circle_run, cantor_run))
    ok &= secs < 600
    record(5, ok, f"circle rate {rc:.3f}, cantor rate {rk:.3f} (<= {beta + 0.3:.3f})", secs)
    assert ok


def test_criterion_06_heat_decay(cantor_run):
    st = cantor_run[0].stages["heatdecay"]
    rate, se = st.outputs["rate"]["value"], st.outputs["rate"]["stderr"]
    ok = st.passed and rate >= 0.435 and se <= 0.2 * rate and st.seconds < 900
    record(6, ok, f"rate {rate:.3f} +- {se:.3f}", st.seconds)
    assert ok


def test_criterion_07_barrier():
    t0 = time.perf_counter()
    cfg = SpaceConfig(2, 1.0)
    K = build_hull(from_points(ideal_point(np.array([[1.0, 0.0], [-1.0, 0.0]]))))
    delta = delta_field(K)
    drep = delta_probe(delta, K, probes_near_geodesic(RandomStream(71), 60, 2, (2.5, 8.0), 2.0))
    prof = bump_profile(drep.min_laplacian, drep.max_gradient**2)
    audit = prof.audit()["ok"]
    sups = [phi_shell(prof, delta, d).sup for d in (4.0, 6.0, 8.0)]
    spread = max(sups) / min(sups) - 1
    phi = assemble_phi(cfg, K, prof, GreenSpec.closed_form(cfg, 2000, 72), 2.0)
    P = probes_near_geodesic(RandomStream(73), 1000, 2, (0.0, 8.0), 2.0)
    frac = subharmonicity_probe(phi, P, 0.02, K).fraction_above(0.5)
    secs = time.perf_counter() - t0
    ok = audit and spread <= 0.01 and frac >= 0.95 and secs < 600
    record(7, ok, f"audit {audit}, sup spread {spread:.1e}, fraction {frac:.3f} of 1000", secs)
    assert ok


PLATEAU = "plateau sup_dist(d_max) <= 1.1 sup_dist(d_max/1.5)"
SUP_BOUND = "sup_dist(d_max) <= 2 C' sup|Phi|"


def test_criterion_08_h2_sweep(sweep_run):
    rep, secs = sweep_run
    b = bands(rep, "sweep")
    ok = (rep.passed and b["all solves converged"]["pass"] and b[PLATEAU]["pass"]
          and b["Schoen-Yau at 95% of probes"]["pass"] and b[SUP_BOUND]["pass"] and secs < 600)
    record(8, ok, f"plateau ratio {b[PLATEAU]['value']:.4f}, "
                  f"Schoen-Yau {b['Schoen-Yau at 95% of probes']['value']:.3f}, "
                  f"sup_dist {b[SUP_BOUND]['value']:.3f} <= {b[SUP_BOUND]['threshold']:.3f}", secs)
    assert ok, b


def test_criterion_09_bent_plane():
    rep, secs = timed_run(bundled_config("thm12-bent-plane"))
    b = bands(rep, "sweep")
    ok = (rep.passed and b["all solves converged"]["pass"]
          and b["sup dist(x, h(iota x)) finite"]["pass"]
          and b["sup dist(x, h(iota x)) plateau"]["pass"] and secs < 1200)
    record(9, ok, f"iota plateau ratio {b['sup dist(x, h(iota x)) plateau']['value']:.4f}", secs)
    assert ok


def test_criterion_10_determinism(cantor_run, sweep_run):
    t0 = time.perf_counter()
    again_cantor = run(bundled_config("thm13-cantor-h3").with_stages(CANTOR_STAGES))
    again_sweep = run(bundled_config("geodesic-h2-sweep"))
    secs = time.perf_counter() - t0
    ok = (again_cantor.hash() == cantor_run[0].hash() and again_sweep.hash() == sweep_run[0].hash())
    record(10, ok, f"hashes {cantor_run[0].hash()[:12]} {sweep_run[0].hash()[:12]} repeat", secs)
    assert ok
