import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperharm.fitting import decay_fit


def test_synthetic_exponential():
    t = np.linspace(1, 10, 10)
    fit = decay_fit(t, np.exp(-2 * t))
    assert fit.rate == pytest.approx(2.0, abs=0.01)
    np.testing.assert_allclose(fit.predict(t), np.exp(-2 * t), rtol=1e-9)


def test_constant_series():
    t = np.linspace(1, 10, 10)
    fit = decay_fit(t, np.full(10, 3.0), stderr=np.full(10, 0.1))
    assert abs(fit.rate) <= max(fit.stderr, 1e-12)


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.integers(0, 2**31))
def test_noisy_rate_within_error(rate, c, seed):
    g = np.random.default_rng(seed)
    t = np.linspace(1, 10, 20)
    v = np.exp(c - rate * t)
    se = 0.02 * v
    fit = decay_fit(t, v * (1 + 0.02 * g.standard_normal(20)), se)
    assert abs(fit.rate - rate) <= 5 * fit.stderr + 1e-9


def test_window_and_errors():
    t = np.arange(10.0)
    v = np.exp(-t)
    fit = decay_fit(t, v, window=(2, 8))
    assert fit.window == (2.0, 8.0)
    with pytest.raises(ValueError):
        decay_fit(t, v, window=(2, 4))
    with pytest.raises(ValueError):
        decay_fit(t, -v)
    assert set(fit.to_dict()) >= {"rate", "stderr", "window"}
