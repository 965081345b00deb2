import math

import numpy as np
import pytest

from hyperharm.boundary import from_points
from hyperharm.geometry import (GeometryError, ideal_point, origin, polar_point,
                                random_far_isometry, unit_distance)
from hyperharm.harmonic import (ball_sweep, dirichlet_solve, energy, measure_c_prime, mesh_ball,
                                schoen_yau_check, tension_norm)
from hyperharm.hull import build_hull, dist_to_hull, retract
from hyperharm.streams import RandomStream


def ball_volume(n, d):
    if n == 2:
        return 2 * math.pi * (math.cosh(d) - 1)
    return math.pi * (math.sinh(2 * d) - 2 * d)


@pytest.fixture(scope="module")
def disk():
    return mesh_ball(origin(2), 1.0, 0.1)


@pytest.mark.parametrize("n, d, h", [(2, 1.0, 0.1), (2, 2.0, 0.2), (3, 1.0, 0.25)])
def test_vertex_count_and_audit(n, d, h):
    m = mesh_ball(origin(n), d, h)
    expected = ball_volume(n, d) / h**n
    interior = int((~m.ghost).sum())
    assert expected / 2 <= interior <= 2 * expected
    audit = m.audit()
    assert audit["connected"] and audit["boundary_in_shell"]
    assert audit["min_interior_degree"] >= 3


def test_mesh_rejects_coarse_spacing():
    with pytest.raises(GeometryError):
        mesh_ball(origin(2), 1.0, 0.3)


def test_mesh_is_equivariant():
    g = random_far_isometry(RandomStream(1), 2.0, 2)
    c = g.apply(origin(2)[None])[0]
    m0, m1 = mesh_ball(origin(2), 1.0, 0.1), mesh_ball(c, 1.0, 0.1)
    np.testing.assert_allclose(m1.weights, m0.weights, rtol=1e-6)
    assert np.all(m0.weights >= 0)


def test_constant_map_has_zero_tension(disk):
    c = polar_point(np.array([0.3, 0.4]), 1.0)
    assert tension_norm(disk, np.tile(c, (len(disk), 1))).max() == 0.0


def test_identity_tension_small(disk):
    assert tension_norm(disk, disk.points).max() <= 0.1


def test_constant_boundary_stays_constant(disk):
    c = polar_point(np.array([1.0, 0.0]), 0.7)
    start = np.tile(origin(2), (len(disk), 1))
    F, rep = dirichlet_solve(disk, np.tile(c, (len(disk), 1)), initial=start)
    assert rep.converged
    assert np.max(unit_distance(F.values, c[None])) < 1e-5


@pytest.mark.parametrize("n, h", [(2, 0.1), (3, 0.25)])
def test_isometry_boundary_recovers_isometry(n, h):
    m = mesh_ball(origin(n), 1.0, h)
    g = random_far_isometry(RandomStream(2), 0.5, n)
    start = np.tile(origin(n), (len(m), 1))
    F, rep = dirichlet_solve(m, g.apply(m.points), initial=start)
    assert rep.converged
    assert rep.sup_dist <= 2 * h


def test_energy_trace_monotone(disk):
    g = random_far_isometry(RandomStream(3), 1.0, 2)
    start = np.tile(origin(2), (len(disk), 1))
    _, rep = dirichlet_solve(disk, g.apply(disk.points), initial=start)
    e = np.asarray(rep.energy_trace)
    assert np.all(np.diff(e) <= 1e-12 * e[0])
    assert rep.trace_csv().startswith("iteration,energy,residual,step")
    assert len(rep.trace_csv().splitlines()) == len(e) + 1


def test_exhausted_budget_is_reported_not_raised(disk):
    g = random_far_isometry(RandomStream(4), 1.0, 2)
    start = np.tile(origin(2), (len(disk), 1))
    _, rep = dirichlet_solve(disk, g.apply(disk.points), tol=1e-14, max_iters=1, initial=start,
                             method="jacobi")
    assert not rep.converged and rep.iterations <= 1


def test_solver_argument_checks(disk):
    with pytest.raises(ValueError):
        dirichlet_solve(disk, disk.points[:5])
    with pytest.raises(ValueError):
        dirichlet_solve(disk, disk.points, method="newton")


def test_energy_of_isometry_is_invariant(disk):
    g = random_far_isometry(RandomStream(5), 3.0, 2)
    assert energy(disk, g.apply(disk.points)) == pytest.approx(energy(disk, disk.points), rel=1e-8)


@pytest.fixture(scope="module")
def retract_solution():
    K = build_hull(from_points(ideal_point(np.array([[1.0, 0.2], [-1.0, 0.3]]))))
    m = mesh_ball(origin(2), 2.0, 0.2)
    R = retract(m.points, K)
    F, rep = dirichlet_solve(m, R)
    return K, m, R, F, rep


def test_schoen_yau_holds_for_retraction_boundary(retract_solution):
    K, m, R, F, rep = retract_solution
    assert rep.converged
    sy = schoen_yau_check(F, R, m)
    assert sy.fraction_ok >= 0.95
    d = sy.to_dict()
    assert d["probes"] == len(sy.probes) > 0


def test_c_prime_is_finite(retract_solution):
    K, m, R, F, rep = retract_solution
    dist = dist_to_hull(m.points, K)[0]
    cp = measure_c_prime(m, R, dist, 1.0)
    assert np.isfinite(cp) and cp >= 0


def test_sweep_warm_start_and_plateau():
    g = random_far_isometry(RandomStream(6), 0.5, 2)
    sw = ball_sweep(g.apply, origin(2), [0.8, 1.2, 1.6], 0.2)
    assert not sw.flagged
    assert sw.plateau_pair == (1, 2)
    assert all(s <= 0.4 for s in sw.sup_dist)
    assert set(sw.to_dict()) >= {"d_grid", "sup_dist", "plateau", "flagged"}
    with pytest.raises(ValueError):
        ball_sweep(g.apply, origin(2), [1.0, 0.8], 0.2)
