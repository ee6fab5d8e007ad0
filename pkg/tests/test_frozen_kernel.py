import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levikernel.coefficient import make_coefficient
from levikernel.frozen_kernel import (
    FrozenKernelCache, FrozenKernelError, apply_frozen_operator, delta_direct, frozen_density,
    frozen_gradient, frozen_interval_mass, frozen_window_mass, symbol,
)
from levikernel.levy_profile import ScaleFunctions, make_profile

import oracles

U = np.linspace(-12.0, 12.0, 49)


@pytest.fixture(scope="module")
def cauchy_cache():
    prof = make_profile("stable", alpha=1.0)
    sf = ScaleFunctions(prof)
    coef = make_coefficient("constant", value=1.0)
    return FrozenKernelCache(coef, prof, sf, t_min=0.05, u_max=16.0)


@pytest.fixture(scope="module")
def skew_cache():
    prof = make_profile("stable", alpha=1.0, integrability_cut=4.0)
    sf = ScaleFunctions(prof)
    coef = make_coefficient("one_sided", a=0.5, b=0.5, s=0.5, omega=0.5, modulation="tanh",
                            kappa3=0.2, kappa4=0.1)
    return FrozenKernelCache(coef, prof, sf, t_min=0.05, u_max=16.0)


@pytest.mark.parametrize("xi", [1e-6, 0.1, 1.0, 7.5, 40.0])
def test_cauchy_symbol(xi):
    prof = make_profile("stable", alpha=1.0)
    coef = make_coefficient("constant", value=1.0)
    assert complex(symbol(coef, prof, 0.0, xi)) == pytest.approx(-oracles.CAUCHY_SYMBOL_SLOPE * xi, rel=1e-8)


@pytest.mark.parametrize("t", [0.05, 0.5, 1.0, 2.0])
def test_cauchy_density_and_time_derivative(cauchy_cache, t):
    np.testing.assert_allclose(frozen_density(cauchy_cache, 0.0, t, U), oracles.cauchy_density(t, U),
                               atol=1e-9, rtol=1e-8)
    np.testing.assert_allclose(apply_frozen_operator(cauchy_cache, 0.0, 0.0, t, U),
                               oracles.cauchy_density_dt(t, U), atol=1e-9, rtol=1e-7)


def test_cauchy_gradient(cauchy_cache):
    t = 0.5
    exact = -2 * U * t / (math.pi ** 2 * t * t + U ** 2) ** 2
    np.testing.assert_allclose(frozen_gradient(cauchy_cache, 0.0, t, U), exact, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.5, 16.0))
def test_window_mass_matches_arctan(cauchy_cache, t, a):
    assert frozen_window_mass(cauchy_cache, 0.0, t, a) == pytest.approx(oracles.cauchy_window_mass(t, a), abs=1e-9)


def test_interval_mass_additive(skew_cache):
    w = np.array([-1.0, 0.0, 2.0])
    t = 0.5
    whole = frozen_interval_mass(skew_cache, t, w, -6.0, 6.0)
    parts = frozen_interval_mass(skew_cache, t, w, -6.0, 0.7) + frozen_interval_mass(skew_cache, t, w, 0.7, 6.0)
    np.testing.assert_allclose(whole, parts, atol=1e-12)
    assert np.all((whole > 0.9) & (whole <= 1.0 + 1e-9))


@pytest.mark.parametrize("w", [-3.0, 0.0, 2.5])
def test_skewed_kernel_is_a_density(skew_cache, w):
    t = 0.5
    u = np.linspace(-16, 16, 3201)
    p = frozen_density(skew_cache, w, t, u)
    assert p.min() >= 0.0
    mass = np.trapezoid(p, u)
    assert mass == pytest.approx(frozen_window_mass(skew_cache, w, t, 16.0), abs=1e-4)
    # a one-sided excess of jumps to the right (beyond the compensation radius) shifts mass right
    assert np.trapezoid(p * u, u) > 0


def test_operator_equals_time_derivative_on_diagonal(skew_cache):
    t, w = 1.0, 0.7
    op = apply_frozen_operator(skew_cache, w, w, t, U)
    dt = skew_cache.invert(t, U, [w], ("dt",))["dt"][:, 0]
    np.testing.assert_allclose(op, dt, atol=1e-12)


def test_delta_direct_small_jump(cauchy_cache):
    # second-order cancellation: |delta| = O(z^2) for |z| < 1
    z = np.array([1e-2, 2e-2])
    d = delta_direct(cauchy_cache, 0.0, 1.0, 0.0, 0.3, z)
    assert abs(d[1] / d[0]) == pytest.approx(4.0, rel=0.05)


def test_cache_roundtrip(tmp_path, skew_cache):
    path = tmp_path / "cache.npz"
    skew_cache.dump(path)
    other = FrozenKernelCache.load(path, skew_cache.coef, skew_cache.profile, skew_cache.sf)
    np.testing.assert_array_equal(other.symbols.values, skew_cache.symbols.values)
    same_components = make_coefficient("one_sided", a=0.2, b=0.5)  # tables do not depend on amplitudes
    FrozenKernelCache.load(path, same_components, skew_cache.profile, skew_cache.sf)
    wrong = make_coefficient("one_sided", a=0.5, b=0.25)
    with pytest.raises(FrozenKernelError):
        FrozenKernelCache.load(path, wrong, skew_cache.profile, skew_cache.sf)


def test_inversion_guards(cauchy_cache):
    with pytest.raises(FrozenKernelError):
        frozen_density(cauchy_cache, 0.0, 0.01, U)
    with pytest.raises(FrozenKernelError):
        frozen_density(cauchy_cache, 0.0, 0.5, np.array([20.0]))
    with pytest.raises(FrozenKernelError):
        frozen_window_mass(cauchy_cache, 0.0, 0.5, 40.0)
