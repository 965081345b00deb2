import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from hyperharm.boundary import from_points, gen_cantor
from hyperharm.geometry import SpaceConfig, ideal_point, origin
from hyperharm.heat import (KernelModel, bound_ratio_sweep, green_shell_integral,
                            greens_closed_form, greens_function, greens_shell_bound, heat_kernel,
                            heat_kernel_bound, log_greens, log_heat_kernel, radial_mass,
                            shell_heat_integral, shell_heat_sweep, tube_volume_closed_form)
from hyperharm.hull import build_hull
from hyperharm.streams import RandomStream

H2, H3 = SpaceConfig(2, 1.0), SpaceConfig(3, 1.0)


def line_hull():
    return build_hull(from_points(ideal_point(np.array([[1.0, 0, 0], [-1.0, 0, 0]]))))


def pde_residual(model, rho, t, h=1e-3):
    """Relative residual of the radial heat equation, by central differences."""
    a, n = model.cfg.a, model.cfg.n
    H = lambda r, s: float(heat_kernel(model, r, s))
    dt = (H(rho, t + h) - H(rho, t - h)) / (2 * h)
    hr = (H(rho + h, t) - H(rho - h, t)) / (2 * h)
    hrr = (H(rho + h, t) - 2 * H(rho, t) + H(rho - h, t)) / h**2
    lap = hrr + (n - 1) * a / math.tanh(a * rho) * hr
    return abs(dt - lap) / max(abs(dt), abs(lap))


def test_h3_kernel_at_origin():
    m = KernelModel.exact_for(H3)
    assert heat_kernel(m, 0.0, 1.0) == pytest.approx((4 * math.pi) ** -1.5 * math.exp(-1), rel=1e-12)
    assert heat_kernel(m, 0.0, 1.0) == pytest.approx(8.259e-3, abs=1e-6)


@pytest.mark.parametrize("cfg", [H3, H2, SpaceConfig(3, 0.5), SpaceConfig(2, 2.0)],
                         ids=["H3", "H2", "H3-a0.5", "H2-a2"])
@pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
def test_unit_mass(cfg, t):
    assert radial_mass(KernelModel.exact_for(cfg), t) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("cfg", [H3, H2], ids=["H3", "H2"])
@pytest.mark.parametrize("rho, t", [(0.5, 0.5), (1.0, 1.0), (3.0, 2.0), (6.0, 4.0)])
def test_heat_equation_residual(cfg, rho, t):
    assert pde_residual(KernelModel.exact_for(cfg), rho, t) < 0.02


@given(st.floats(0.0, 15.0), st.floats(0.3, 10.0), st.floats(0.3, 3.0))
def test_curvature_scaling(rho, t, a):
    for n in (2, 3):
        ma = KernelModel.exact_for(SpaceConfig(n, a))
        m1 = KernelModel.exact_for(SpaceConfig(n, 1.0))
        lhs = log_heat_kernel(ma, rho, t)
        rhs = n * math.log(a) + log_heat_kernel(m1, a * rho, a * a * t)
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_kernel_argument_checks():
    m = KernelModel.exact_for(H3)
    with pytest.raises(ValueError):
        heat_kernel(m, 1.0, 0.0)
    with pytest.raises(ValueError):
        heat_kernel(m, -1.0, 1.0)
    with pytest.raises(ValueError):
        KernelModel(H3, "exact-H2")
    with pytest.raises(ValueError):
        heat_kernel_bound(KernelModel(H3, "hyp-bound"), 0.0, 0.5)


def test_bound_examples():
    assert heat_kernel_bound(KernelModel(H3, "hyp-bound"), 0.0, 1.0) == pytest.approx(math.exp(-1))


@pytest.mark.parametrize("cfg", [H2, H3], ids=["H2", "H3"])
@pytest.mark.parametrize("flavor", ["hyp-bound", "davies-bound"])
def test_bound_conformance(cfg, flavor):
    rep = bound_ratio_sweep(cfg, flavor, np.linspace(0, 20, 41), np.linspace(1, 16, 16))
    assert np.isfinite(rep["constant"]) and rep["conforms"]


@pytest.mark.parametrize("cfg", [H3, H2], ids=["H3", "H2"])
@pytest.mark.parametrize("rho", [0.3, 1.0, 3.0])
def test_green_quadrature_matches_closed_form(cfg, rho):
    q = greens_function(KernelModel.exact_for(cfg), rho)
    assert q == pytest.approx(float(greens_closed_form(cfg, rho)), rel=1e-4)


def test_green_h3_value_at_one():
    assert greens_closed_form(H3, 1.0) == pytest.approx(math.exp(-1) / (4 * math.pi * math.sinh(1)))
    assert greens_closed_form(H3, 1.0) == pytest.approx(2.4911e-2, abs=1e-6)


def test_green_decay_rate():
    rho = np.linspace(3, 12, 20)
    slope = np.polyfit(rho, log_greens(H3, rho), 1)[0]
    assert -slope == pytest.approx(2.0, abs=0.05)
    np.testing.assert_allclose(np.exp(log_greens(H2, rho)), greens_closed_form(H2, rho), rtol=1e-9)
    with pytest.raises(ValueError):
        greens_closed_form(H3, 0.0)


def _tube_heat_oracle(d, t):
    # cosh rho = cosh r cosh s; volume element 2 pi sinh r cosh r dr ds
    m = KernelModel.exact_for(H3)

    def f(s, r):
        rho = math.acosh(math.cosh(r) * math.cosh(s))
        return 4 * math.pi * math.sinh(r) * math.cosh(r) * heat_kernel(m, rho, t)
    return integrate.dblquad(f, 0, d, 0, 40, epsrel=1e-8)[0]


@pytest.mark.parametrize("d, t", [(1.0, 4.0), (6.0, 1.0)])
def test_shell_heat_integral_single_geodesic(d, t):
    res = shell_heat_integral(KernelModel.exact_for(H3), line_hull(), origin(3), d, t,
                              RandomStream(1), 20_000)
    assert not res.flagged
    assert abs(res.value - _tube_heat_oracle(d, t)) <= 3 * res.stderr


def test_shell_heat_wide_neighborhood_near_unit_mass():
    res = shell_heat_integral(KernelModel.exact_for(H3), line_hull(), origin(3), 6.0, 1.0,
                              RandomStream(2), 20_000)
    assert abs(res.value - 1.0) <= 3 * res.stderr + 0.01


def test_shell_sweep_rejects_small_times():
    with pytest.raises(ValueError):
        shell_heat_sweep(KernelModel.exact_for(H3), line_hull(), origin(3), 1.0, [0.5],
                         RandomStream(0), 100)


def test_green_shell_finite_for_cantor_divergent_for_constant():
    K = build_hull(gen_cantor(1 / 3, 6), "all")
    v, e, flagged = green_shell_integral(H3, K, origin(3), 2.0, RandomStream(3), 2000)
    assert not flagged and v > 0 and e < v
    _, _, flagged = green_shell_integral(H3, K, origin(3), 2.0, RandomStream(3), 2000,
                                         green=lambda r: np.ones_like(r), log_green=lambda r: 0.0)
    assert flagged


def test_green_shell_vanishes_with_depth():
    K = line_hull()
    vals = greens_shell_bound(H3, K, 0.05, origin(3)[None], RandomStream(4), 4000).values
    big = greens_shell_bound(H3, K, 1.0, origin(3)[None], RandomStream(4), 4000).values
    assert vals[0] < 0.05 * big[0]


def test_tube_volume_closed_form():
    assert tube_volume_closed_form(H3, 1.0, 2.0) == pytest.approx(math.pi * math.sinh(1) ** 2 * 2)
    assert tube_volume_closed_form(H2, 1.0, 2.0) == pytest.approx(4 * math.sinh(1))
