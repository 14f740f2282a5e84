import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polypin.lattice import Profile
from polypin.stefan import HeatSeries, heat_crank_nicolson, heat_dirichlet


def tent_profile(n=256):
    return Profile.from_function(lambda x: 1 - np.abs(x), -1.0, 1.0, n)


def cos_profile(n=400):
    p = Profile.from_function(lambda x: np.cos(np.pi * x / 2), -1.0, 1.0, n)
    v = np.array(p.values)
    v[0] = v[-1] = 0.0
    return Profile(-1.0, 1.0, v)


class TestSeries:
    @pytest.mark.parametrize("t", [0.01, 0.1, 0.5])
    def test_eigenfunction(self, t):
        f0 = cos_profile(2000)
        u = heat_dirichlet(f0, t)
        exact = np.exp(-np.pi ** 2 * t / 4) * np.cos(np.pi * u.x / 2)
        assert np.max(np.abs(u.values - exact)) < 1e-6

    def test_zero(self):
        f0 = Profile(-1.0, 1.0, np.zeros(33))
        assert np.all(heat_dirichlet(f0, 0.3).values == 0)

    def test_time_zero_identity(self):
        f0 = tent_profile()
        assert heat_dirichlet(f0, 0.0) is f0

    def test_negative_time(self):
        with pytest.raises(ValueError):
            heat_dirichlet(tent_profile(), -0.1)

    def test_nonzero_ends_rejected(self):
        with pytest.raises(ValueError):
            HeatSeries(Profile(0.0, 1.0, np.ones(5)))

    def test_series_reproduces_initial_data(self):
        f0 = tent_profile(64)
        s = HeatSeries(f0, modes=20000)
        assert np.max(np.abs(s(f0.x, 1e-7) - f0.values)) < 2e-3

    def test_tail_bound_decreases(self):
        s = HeatSeries(tent_profile(), modes=16)
        bounds = [s.tail_bound(t) for t in (1e-4, 1e-3, 1e-2)]
        assert bounds[0] > bounds[1] > bounds[2] > 0

    def test_tail_bound_is_honest(self):
        f0 = tent_profile(256)
        t = 1e-3
        coarse, fine = HeatSeries(f0, modes=8), HeatSeries(f0, modes=4096)
        x = np.linspace(-1, 1, 501)
        assert np.max(np.abs(coarse(x, t) - fine(x, t))) <= coarse.tail_bound(t)

    def test_derivative(self):
        s = HeatSeries(cos_profile(2000))
        x = np.linspace(-0.9, 0.9, 7)
        t = 0.2
        exact = -np.pi / 2 * np.exp(-np.pi ** 2 * t / 4) * np.sin(np.pi * x / 2)
        np.testing.assert_allclose(s.derivative(x, t), exact, atol=1e-6)


class TestCrankNicolson:
    def test_tent_agrees_with_series(self):
        f0 = tent_profile(256)
        a = heat_dirichlet(f0, 0.1)
        b = heat_crank_nicolson(f0, 0.1)
        assert np.max(np.abs(a.values - b.values)) < 1e-4

    def test_shifted_interval(self):
        f0 = Profile.from_function(lambda x: np.minimum(x - 2, 5 - x).clip(0), 2.0, 5.0, 300)
        a = heat_dirichlet(f0, 0.2)
        b = heat_crank_nicolson(f0, 0.2)
        assert np.max(np.abs(a.values - b.values)) < 1e-4


@st.composite
def bumpy_profiles(draw):
    n = 8
    v = np.array([0.0] + draw(st.lists(st.floats(-1, 1), min_size=n - 1, max_size=n - 1)) + [0.0])
    x = np.linspace(0, 1, n + 1)
    xs = np.linspace(0, 1, 129)
    return Profile(0.0, 1.0, np.interp(xs, x, v))


class TestMaximumPrinciple:
    @given(bumpy_profiles())
    def test_extrema_move_inward(self, f0):
        s = HeatSeries(f0, modes=512)
        x = np.linspace(0, 1, 513)
        prev = s(x, 1e-3)
        for t in (3e-3, 1e-2, 3e-2, 0.1):
            cur = s(x, t)
            assert cur.max() <= max(prev.max(), 0) + 1e-9
            assert cur.min() >= min(prev.min(), 0) - 1e-9
            prev = cur

    @given(bumpy_profiles())
    def test_lipschitz_preserved(self, f0):
        s = HeatSeries(f0, modes=1024)
        bound = np.max(np.abs(f0.slopes()))
        x = np.linspace(0, 1, 257)
        for t in (1e-3, 1e-2):
            assert np.max(np.abs(s.derivative(x, t))) <= bound * (1 + 1e-2) + 1e-6
