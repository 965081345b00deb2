import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperharm.boundary import (BentPlaneFamily, BoundarySet, InsufficientScales, UndersampledScale,
                                bent_boundary, bent_embed, bent_unfold, box_dimension,
                                cantor_angles, covering_number, from_points, gen_cantor,
                                gen_round_circle, gen_snowflake, invariant_dimension)
from hyperharm.geometry import (GeometryError, distance, ideal_point, origin, polar_point,
                                visual_distance)
from hyperharm.streams import RandomStream


def test_round_circle_symmetric():
    S = gen_round_circle(4)
    o = origin(3)
    P = S.points
    vals = [visual_distance(o, P[i], P[(i + 1) % 4]) for i in range(4)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-12)
    assert covering_number(S, S.resolution * 1.01) <= 4
    with pytest.raises(GeometryError):
        gen_round_circle(2)


def test_round_circle_dimension():
    assert box_dimension(gen_round_circle(2048)).beta == pytest.approx(1.0, abs=0.05)


def test_circle_cover_against_arc_oracle():
    # an eps-ball of the visual metric at o is an arc of half-angle 4 arctan(eps)
    S = gen_round_circle(2048)
    eps = 0.01
    half = 4 * math.atan(eps)
    N = covering_number(S, eps)
    assert math.ceil(math.pi / half) <= N <= math.floor(2 * math.pi / half) + 1


@pytest.mark.parametrize("ratio, beta", [(1 / 3, math.log(2) / math.log(3)), (1 / 4, 0.5)])
def test_cantor_dimension(ratio, beta):
    assert box_dimension(gen_cantor(ratio, 10)).beta == pytest.approx(beta, abs=0.05)


def test_cantor_depth_one_and_pair():
    S = gen_cantor(1 / 3, 1)
    assert len(S) == 2
    assert box_dimension(S).beta == pytest.approx(0.0, abs=0.02)


@pytest.mark.parametrize("ratio", [0.0, 0.5, 0.6, -0.1])
def test_cantor_ratio_range(ratio):
    with pytest.raises(GeometryError):
        gen_cantor(ratio, 4)


@given(st.floats(0.05, 0.45), st.integers(1, 8))
def test_cantor_angles_structure(ratio, depth):
    phi = cantor_angles(ratio, depth)
    assert len(phi) == 2**depth
    assert np.all(np.diff(phi) > 0)
    assert phi[0] == 0 and phi[-1] < 2 * np.pi


def test_snowflake_dimensions():
    assert box_dimension(gen_snowflake(0.0, 10)).beta == pytest.approx(1.0, abs=0.05)
    beta = box_dimension(gen_snowflake(0.3, 12)).beta
    assert 1.05 < beta < 1.9


def test_snowflake_rejects_bad_roughness():
    with pytest.raises(GeometryError):
        gen_snowflake(0.5, 3)


def test_single_point_cover():
    S = from_points(ideal_point(np.array([[1.0, 0, 0]])))
    assert covering_number(S, 0.2) == 1


def test_cover_refuses_undersampled_scale():
    S = gen_round_circle(64)
    with pytest.raises(UndersampledScale):
        covering_number(S, S.resolution / 2)


def test_invariant_dimension():
    circle = gen_round_circle(2048)
    est = invariant_dimension(circle, RandomStream(1), trials=10)
    assert est.beta == pytest.approx(1.0, abs=0.1)
    cantor = gen_cantor(1 / 3, 10)
    assert invariant_dimension(cantor, RandomStream(2), trials=20, t_max=5).beta <= 0.75
    with pytest.raises(ValueError):
        invariant_dimension(circle, RandomStream(1), trials=3)


def test_invariant_dimension_identity_only_matches_box():
    S = gen_cantor(1 / 3, 8)
    est = invariant_dimension(S, RandomStream(3), trials=10, t_max=0.0)
    assert est.beta == pytest.approx(box_dimension(S).beta, abs=1e-12)


def test_boundary_json_roundtrip():
    S = gen_cantor(1 / 3, 4)
    T = BoundarySet.from_json(S.to_json())
    assert np.array_equal(S.points, T.points) and T.generator == S.generator


def test_bent_zero_angle_is_round_circle():
    fam = BentPlaneFamily(0.0)
    np.testing.assert_allclose(bent_boundary(fam, 64).points, gen_round_circle(64).points,
                               atol=1e-15)


@pytest.mark.parametrize("theta", [0.0, math.pi / 4])
def test_bent_embed_unfold_roundtrip(theta, rng):
    fam = BentPlaneFamily(theta)
    dirs = rng.gen.standard_normal((200, 2))
    x = polar_point(dirs / np.linalg.norm(dirs, axis=1, keepdims=True), rng.gen.uniform(0, 4, 200))
    y = bent_embed(fam, x)
    np.testing.assert_allclose(bent_unfold(fam, y), x, atol=1e-9 * np.max(x[:, 0]))
    # each half-plane goes in isometrically
    up = x[x[:, 2] >= 0]
    k = len(up) // 2
    P, Q = up[:k], up[k:2 * k]
    np.testing.assert_allclose(distance(bent_embed(fam, P), bent_embed(fam, Q)),
                               distance(P, Q), atol=1e-8)


def test_bent_zero_angle_totally_geodesic(rng):
    fam = BentPlaneFamily(0.0)
    dirs = rng.gen.standard_normal((100, 2))
    x = polar_point(dirs / np.linalg.norm(dirs, axis=1, keepdims=True), rng.gen.uniform(0, 3, 100))
    np.testing.assert_allclose(distance(bent_embed(fam, x[:50]), bent_embed(fam, x[50:])),
                               distance(x[:50], x[50:]), atol=1e-9)


def test_bent_angle_range():
    with pytest.raises(GeometryError):
        BentPlaneFamily(math.pi / 2)


def test_bent_tie_goes_to_first_half_plane():
    theta = math.pi / 4
    fam = BentPlaneFamily(theta)
    # on the bisector of the half-planes x3 = 0, x2 >= 0 and its bent partner
    beta = (theta - math.pi) / 2
    s = 1.0
    y = np.array([math.cosh(s), 0.3, math.sinh(s) * math.cos(beta), math.sinh(s) * math.sin(beta)])
    y[0] = math.sqrt(1 + y[1] ** 2 + y[2] ** 2 + y[3] ** 2)
    x = bent_unfold(fam, y)
    assert x[2] > 0
