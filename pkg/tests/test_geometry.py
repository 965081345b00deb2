import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize

from conftest import random_points
from hyperharm.geometry import (GeodesicLine, GeometryError, Isometry, SpaceConfig, ball_volume,
                                dist_to_line, distance, exp_map, fd_laplacian, from_poincare,
                                ideal_point, log_map, mink_inner, mink_norm, origin, polar_point,
                                random_far_isometry, sample_annulus_uniform, sample_ball_uniform,
                                tangent_frame, to_poincare, transvection, visual_distance)
from hyperharm.streams import RandomStream

radius = st.floats(0.0, 6.0)
angle = st.floats(0.0, 2 * math.pi)


def point_h2(r, th, a=1.0):
    return polar_point(np.array([math.cos(th), math.sin(th)]), r, a)


def poincare_distance(x, y):
    # independent oracle: the disk-model formula
    p, q = to_poincare(x), to_poincare(y)
    num = 2 * np.sum((p - q) ** 2, axis=-1)
    den = (1 - np.sum(p * p, axis=-1)) * (1 - np.sum(q * q, axis=-1))
    return np.arccosh(1 + num / den)


def test_mink_inner_examples():
    e0 = np.array([1.0, 0, 0, 0])
    assert mink_inner(e0, e0) == -1
    assert mink_inner(e0, np.array([0.0, 1, 0, 0])) == 0
    v = np.array([math.cosh(1), math.sinh(1), 0, 0])
    assert mink_inner(v, e0) == pytest.approx(-1.5430806348, rel=1e-10)


def test_distance_examples():
    o = origin(3)
    y = np.array([math.cosh(2), math.sinh(2), 0, 0])
    assert distance(o, o) == 0
    assert distance(o, y) == pytest.approx(2.0, abs=1e-12)
    assert distance(o, y, a=2.0) == pytest.approx(1.0, abs=1e-12)


def test_distance_matches_polyline_length(rng):
    P = random_points(rng, 20, 3)
    Q = random_points(rng, 20, 3)
    for x, y in zip(P, Q):
        v = log_map(x, y)
        ts = np.linspace(0, 1, 2001)
        path = exp_map(np.broadcast_to(x, (len(ts), 4)), ts[:, None] * v)
        seg = path[1:] - path[:-1]
        length = np.sum(np.sqrt(np.maximum(mink_inner(seg, seg), 0)))
        assert length == pytest.approx(float(distance(x, y)), rel=1e-6, abs=1e-9)


@given(radius, angle, radius, angle)
def test_distance_agrees_with_poincare_model(r1, t1, r2, t2):
    x, y = point_h2(r1, t1), point_h2(r2, t2)
    assert distance(x, y) == pytest.approx(poincare_distance(x, y), abs=1e-7)


@given(radius, angle, radius, angle, radius, angle)
def test_metric_axioms(r1, t1, r2, t2, r3, t3):
    x, y, z = point_h2(r1, t1), point_h2(r2, t2), point_h2(r3, t3)
    dxy, dyx = distance(x, y), distance(y, x)
    assert dxy >= 0
    assert dxy == pytest.approx(dyx, abs=1e-12)
    assert distance(x, z) <= dxy + distance(y, z) + 1e-9


@given(radius, angle, radius, angle)
def test_exp_log_roundtrip(r1, t1, r2, t2):
    x, y = point_h2(r1, t1), point_h2(r2, t2)
    v = log_map(x, y)
    assert abs(mink_inner(x, v)) < 1e-9 * max(1.0, x[0] * y[0])
    assert mink_norm(v) == pytest.approx(float(distance(x, y)), abs=1e-9)
    # cancellation in y - cosh(d) x costs about x0 y0 ulps
    assert np.max(np.abs(exp_map(x, v) - y)) < 1e-9 * max(1.0, x[0] * y[0])


def test_log_of_self_and_exp_at_origin():
    o = origin(3)
    assert np.all(log_map(o, o) == 0)
    t = 0.7
    np.testing.assert_allclose(exp_map(o, np.array([0, t, 0, 0])),
                               [math.cosh(t), math.sinh(t), 0, 0], atol=1e-15)


def test_segment_point_examples():
    o = origin(3)
    y = np.array([math.cosh(2), math.sinh(2), 0, 0])
    seg = GeodesicLine(o, y, "segment")
    np.testing.assert_allclose(seg.point(0.0), o, atol=1e-12)
    np.testing.assert_allclose(seg.point(2.0), y, atol=1e-12)
    np.testing.assert_allclose(seg.point(1.0), [math.cosh(1), math.sinh(1), 0, 0], atol=1e-12)
    with pytest.raises(GeometryError):
        seg.point(2.5)


def test_dist_to_line_h2_example():
    line = GeodesicLine(ideal_point([1, 0]), ideal_point([-1, 0]))
    for s in (0.0, 0.5, 2.0):
        p = np.array([math.cosh(s), 0, math.sinh(s)])
        d, foot = dist_to_line(p, line)
        assert d == pytest.approx(s, abs=1e-9)
        np.testing.assert_allclose(foot, origin(2), atol=1e-9)


def test_dist_to_line_brute_force(rng):
    P = random_points(rng, 10, 3)
    line = GeodesicLine.through(random_points(rng, 1, 3)[0], random_points(rng, 1, 3)[0])
    for p in P:
        res = optimize.minimize_scalar(lambda t: float(distance(p, line.point(t))),
                                       bounds=(-30, 30), method="bounded",
                                       options={"xatol": 1e-10})
        assert dist_to_line(p, line)[0] == pytest.approx(res.fun, abs=1e-6)


def test_visual_distance_examples():
    o = origin(2)
    y, z = ideal_point([1.0, 0.0]), ideal_point([-1.0, 0.0])
    assert visual_distance(o, y, z) == pytest.approx(1.0)
    for th in (0.3, 1.0, 2.5):
        z = ideal_point([math.cos(th), math.sin(th)])
        expect = math.sin(th / 2) / (1 + math.cos(th / 2))
        assert visual_distance(o, y, z) == pytest.approx(expect, rel=1e-10)
        line = GeodesicLine(y, z)
        res = optimize.minimize_scalar(lambda t: float(distance(o, line.point(t))),
                                       bounds=(-20, 20), method="bounded",
                                       options={"xatol": 1e-11})
        assert visual_distance(o, y, z) == pytest.approx(math.exp(-res.fun), rel=1e-6)


@given(st.floats(0.0, 3.0), st.floats(0.1, 3.0))
def test_visual_distance_moves_lipschitz(t, th):
    y = ideal_point([1.0, 0.0])
    z = ideal_point([math.cos(th), math.sin(th)])
    v0 = visual_distance(origin(2), y, z)
    v1 = visual_distance(polar_point(np.array([1.0, 0.0]), t), y, z)
    assert math.exp(-t) * (1 - 1e-9) <= v1 / v0 <= math.exp(t) * (1 + 1e-9)


def test_random_far_isometry_examples(rng, n):
    for t in (0.0, 1.0, 5.0):
        g = random_far_isometry(rng, t, n)
        assert distance(origin(n), g.apply(origin(n))) == pytest.approx(t, abs=1e-9)
        assert abs(abs(np.linalg.det(g.matrix)) - 1) < 1e-9
    with pytest.raises(GeometryError):
        random_far_isometry(rng, -1.0, n)


def test_isometry_invariance_bulk(rng, n):
    P = random_points(rng, 1000, n)
    Q = random_points(rng, 1000, n)
    d0 = distance(P, Q)
    g = random_far_isometry(rng, 3.0, n)
    assert np.max(np.abs(distance(g.apply(P), g.apply(Q)) - d0)) < 1e-8
    gi = g.inverse()
    np.testing.assert_allclose((gi @ g).matrix, np.eye(n + 1), atol=1e-9)


def test_isometry_rejects_non_lorentz():
    with pytest.raises(GeometryError):
        Isometry(np.diag([1.0, 2.0, 1.0]))
    with pytest.raises(GeometryError):
        Isometry(np.diag([-1.0, 1.0, 1.0]))


def test_transvection_maps_x_to_y(rng):
    x, y = random_points(rng, 2, 3)
    M = transvection(x, y)
    np.testing.assert_allclose(M @ x, y, atol=1e-9 * y[0])
    Isometry(M)


def test_tangent_frame_orthonormal(rng, n):
    x = random_points(rng, 5, n)
    E = tangent_frame(x)
    for i in range(5):
        G = mink_inner(E[i][:, None, :], E[i][None, :, :])
        np.testing.assert_allclose(G, np.eye(n), atol=1e-9)
        np.testing.assert_allclose(mink_inner(E[i], x[i]), 0, atol=1e-9)


@pytest.mark.parametrize("n, expect", [(2, 2 * math.pi * (math.cosh(1) - 1)),
                                       (3, math.pi * (math.sinh(2) - 2))])
def test_ball_volume_examples(n, expect):
    cfg = SpaceConfig(n, 1.0)
    assert ball_volume(cfg, 0.0) == 0
    assert ball_volume(cfg, 1.0) == pytest.approx(expect, rel=1e-12)
    with pytest.raises(GeometryError):
        ball_volume(cfg, -1.0)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("a", [1.0, 0.5])
def test_ball_volume_quadrature(n, a):
    cfg = SpaceConfig(n, a)
    area = 2 * math.pi if n == 2 else 4 * math.pi
    for r in (0.3, 2.0, 5.0):
        q = integrate.quad(lambda s: area * (math.sinh(a * s) / a) ** (n - 1), 0, r)[0]
        assert ball_volume(cfg, r) == pytest.approx(q, rel=1e-10)


def test_sample_ball_fraction_inside_half_radius(n):
    cfg = SpaceConfig(n, 1.0)
    c = polar_point(np.eye(n)[0], 1.5)
    pts = sample_ball_uniform(RandomStream(7), c, 3.0, 100_000, cfg)
    inside = distance(c, pts) <= 1.5
    p = float(ball_volume(cfg, 1.5) / ball_volume(cfg, 3.0))
    se = math.sqrt(p * (1 - p) / len(pts))
    assert abs(inside.mean() - p) <= 3 * se
    again = sample_ball_uniform(RandomStream(7), c, 3.0, 100_000, cfg)
    assert np.array_equal(pts, again)


def test_annulus_radii_within_bounds(h3):
    pts, rad = sample_annulus_uniform(RandomStream(1), origin(3), 2.0, 3.0, 5000, h3)
    assert rad.min() >= 2.0 - 1e-12 and rad.max() <= 3.0 + 1e-12
    np.testing.assert_allclose(distance(origin(3), pts), rad, atol=1e-9)


def test_fd_laplacian_constant_and_rho_squared(n):
    cfg = SpaceConfig(n, 1.0)
    o = origin(n)
    x = polar_point(np.eye(n)[0], 1.0)
    assert abs(fd_laplacian(lambda P: np.full(len(P), 3.0), x)) < 1e-10
    lap = fd_laplacian(lambda P: distance(o, P) ** 2, x, h=0.01)
    rho = 1.0
    expect = 2 + 2 * rho * (n - 1) * cfg.a / math.tanh(cfg.a * rho)
    assert lap == pytest.approx(expect, rel=0.02)
    with pytest.raises(GeometryError):
        fd_laplacian(lambda P: P[:, 0], x, h=0.5)


@given(radius, angle)
def test_poincare_roundtrip(r, th):
    x = point_h2(min(r, 5.0), th)
    np.testing.assert_allclose(from_poincare(to_poincare(x)), x, rtol=1e-8, atol=1e-8)
