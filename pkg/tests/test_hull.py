import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from conftest import random_points
from hyperharm.boundary import from_points, gen_cantor, gen_round_circle
from hyperharm.geometry import (GeodesicLine, GeometryError, SpaceConfig, dist_to_line, distance,
                                ideal_point, origin, polar_point)
from hyperharm.hull import (build_hull, cone_inclusion_probe, dist_to_hull, hull_of_lines,
                            lipschitz_profile, measure_pad, retract, tube_volume_estimate,
                            volume_profile)
from hyperharm.streams import RandomStream


def geodesic_hull(n=3):
    e = np.zeros(n)
    e[0] = 1.0
    return build_hull(from_points(ideal_point(np.array([e, -e]))))


def tube_annulus_oracle(n, d, r_in, r_out):
    """Volume of N_d(line) between radii r_in and r_out about a point of the line.

    A point at distance r from the line and s along it is at distance rho with
    cosh rho = cosh r cosh s; the volume element is sinh r cosh r dr dtheta ds in
    H^3 and cosh r dr ds in H^2.
    """
    def length(r):
        def half(R):
            return math.acosh(max(math.cosh(R) / math.cosh(r), 1.0))
        return 2 * (half(r_out) - half(r_in))

    if n == 3:
        f = lambda r: 2 * math.pi * math.sinh(r) * math.cosh(r) * length(r)
        return integrate.quad(f, 0, d, limit=200)[0]
    return 2 * integrate.quad(lambda r: math.cosh(r) * length(r), 0, d, limit=200)[0]


def test_two_points_single_geodesic():
    K = geodesic_hull()
    assert len(K) == 1


def test_circle_all_pairs():
    K = build_hull(gen_round_circle(64), "all")
    assert len(K) == 64 * 63 // 2


def test_chain_policy():
    K = build_hull(gen_round_circle(8), "chain")
    # steps 1 and 2 give 8 lines each; step 4 pairs antipodes once
    assert len(K) == 20
    assert K.pair_policy == "chain"


def test_stratified_respects_budget():
    K = build_hull(gen_cantor(1 / 3, 8), "auto", budget=500, rng=RandomStream(1))
    assert len(K) == 500
    with pytest.raises(ValueError):
        build_hull(gen_cantor(1 / 3, 8), "bogus", budget=10, rng=RandomStream(1))


def test_hull_validation():
    ends = ideal_point(np.array([[1.0, 0, 0], [0, 1.0, 0]]))
    with pytest.raises(GeometryError):
        hull_of_lines(ends, [(0, 0)])
    with pytest.raises(GeometryError):
        hull_of_lines(ends, [(0, 1), (1, 0)])


def test_dist_to_hull_matches_line_minimum(rng):
    K = build_hull(gen_cantor(1 / 3, 3), "all")
    P = random_points(rng, 200, 3, rmax=4)
    d, foot = dist_to_hull(P, K)
    brute = np.min([dist_to_line(P, line)[0] for line in K.lines], axis=0)
    np.testing.assert_allclose(d, brute, atol=1e-9)
    np.testing.assert_allclose(distance(P, foot), d, atol=1e-7)


@given(st.floats(0.0, 5.0), st.floats(-3.0, 3.0), st.floats(0, 2 * math.pi))
def test_geodesic_distance_example(s, t, th):
    K = geodesic_hull()
    line = K.lines[0]
    foot = line.point(t)
    base, u = line.base_and_direction()
    ut = math.sinh(t) * base + math.cosh(t) * u
    nrm = np.array([0.0, 0.0, math.cos(th), math.sin(th)])
    p = math.cosh(s) * foot + math.sinh(s) * nrm
    d, f = dist_to_hull(p, K)
    assert d == pytest.approx(s, abs=1e-7)
    assert float(distance(f, foot)) < 1e-6 * math.cosh(t)


def test_retract_fixes_hull_points_and_is_idempotent(rng):
    K = build_hull(gen_cantor(1 / 3, 3), "all")
    on = np.array([line.point(0.3) for line in K.lines])
    np.testing.assert_allclose(retract(on, K), on, atol=1e-9)
    P = random_points(rng, 50, 3)
    R = retract(P, K)
    np.testing.assert_allclose(retract(R, K), R, atol=1e-8)


def test_dist_to_hull_is_1_lipschitz(rng):
    K = build_hull(gen_round_circle(16), "all")
    P = random_points(rng, 500, 3)
    Q = random_points(rng, 500, 3)
    dP, dQ = dist_to_hull(P, K)[0], dist_to_hull(Q, K)[0]
    assert np.all(np.abs(dP - dQ) <= distance(P, Q) + 1e-9)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("d, r_in, r_out", [(1.0, 0.0, 2.0), (1.0, 3.0, 4.0), (2.0, 1.0, 3.0)])
def test_tube_volume_against_quadrature(n, d, r_in, r_out):
    K = geodesic_hull(n)
    est, se, hits = tube_volume_estimate(K, origin(n), r_in, r_out, d, 40_000, RandomStream(5))
    exact = tube_annulus_oracle(n, d, r_in, r_out)
    assert hits > 0
    assert abs(est - exact) <= 4 * se + 1e-9 * exact


def test_tube_volume_overlapping_lines_matches_ambient():
    # importance weights correct for points covered by several cylinders
    K = build_hull(gen_round_circle(6), "all")
    cfg = SpaceConfig(3, 1.0)
    tube, se, _ = tube_volume_estimate(K, origin(3), 1.0, 2.0, 1.0, 40_000, RandomStream(2))
    amb = volume_profile(K, origin(3), 1.0, 2.0, 40_000, RandomStream(3), method="ambient")
    assert tube == pytest.approx(amb.shell_volume[1], abs=4 * math.hypot(se, amb.shell_stderr[1]))


def test_volume_profile_single_geodesic_is_linear():
    K = geodesic_hull()
    prof = volume_profile(K, origin(3), 1.0, 8.0, 20_000, RandomStream(4))
    assert prof.fitted_rate <= 0.1
    assert prof.flagged == []
    assert "shell,estimate,stderr" in prof.to_csv()


def test_volume_profile_rejects_bad_args():
    with pytest.raises(ValueError):
        volume_profile(geodesic_hull(), origin(3), 1.0, 1.0, 100, RandomStream(0))


def test_lipschitz_profile_geodesic():
    prof = lipschitz_profile(geodesic_hull(), RandomStream(8), pairs_per_shell=100)
    assert -1.25 <= prof.slope <= -0.7
    assert np.all(prof.accepted == 100)


def test_cone_probe():
    S = gen_round_circle(256)
    rep = cone_inclusion_probe(S, origin(3), 2.0, 200, RandomStream(1), K=build_hull(S, "chain"))
    assert rep["max_gap"] < 1.0 and rep["max_hull_distance"] >= 0
    with pytest.raises(ValueError):
        cone_inclusion_probe(S, origin(3), 0.5, 10, RandomStream(1))


def test_measure_pad_small_for_dense_hull():
    S = gen_round_circle(64)
    assert measure_pad(S, build_hull(S, "all"), RandomStream(0), 500) < 0.5
